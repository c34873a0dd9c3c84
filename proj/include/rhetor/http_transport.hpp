#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"
#include "rhetor/gateway.hpp"

namespace rhetor {

// Live transport speaking the POST /v1/chat/completions JSON contract.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key_env)
        : base_url_(std::move(base_url)), api_key_env_(std::move(api_key_env)) {}

    json send(const json& request_body) override {
        const char* key = std::getenv(api_key_env_.c_str());
        if (key == nullptr || *key == '\0')
            throw AuthError("credential environment variable " + api_key_env_ + " is not set");

        httplib::Client client(base_url_);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
        auto result = client.Post("/v1/chat/completions", headers, request_body.dump(),
                                  "application/json");
        if (!result)
            throw NetworkError("transport failure: " + httplib::to_string(result.error()));
        if (result->status == 401 || result->status == 403)
            throw AuthError("upstream rejected credential (HTTP " +
                            std::to_string(result->status) + ")");
        if (result->status != 200)
            throw NetworkError("upstream returned HTTP " + std::to_string(result->status) +
                               ": " + result->body);
        try {
            return json::parse(result->body);
        } catch (const json::parse_error& e) {
            throw NetworkError(std::string("upstream returned invalid JSON: ") + e.what());
        }
    }

private:
    std::string base_url_;
    std::string api_key_env_;
};

inline std::unique_ptr<Transport> make_http_transport(const GatewayConfig& config) {
    return std::make_unique<HttpTransport>(config.base_url, config.api_key_env);
}

}  // namespace rhetor
