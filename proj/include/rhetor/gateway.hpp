#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rhetor/detail/sha256.hpp"
#include "rhetor/detail/strings.hpp"
#include "rhetor/jsonl.hpp"

namespace rhetor {

enum class Role { system, user, assistant };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

inline Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw std::invalid_argument("unknown chat role: " + s);
}

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

inline void to_json(json& j, const ChatMessage& m) {
    j = json{{"role", to_string(m.role)}, {"content", m.content}};
}

inline void from_json(const json& j, ChatMessage& m) {
    m.role = role_from_string(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

struct CompletionRequest {
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    std::vector<ChatMessage> messages;
    std::optional<int> max_output_tokens;
};

struct CompletionResponse {
    std::string text;
    std::map<std::string, long> token_usage;
    bool cache_hit = false;
};

enum class GatewayMode { live, record, replay };

inline std::string to_string(GatewayMode m) {
    switch (m) {
        case GatewayMode::live: return "live";
        case GatewayMode::record: return "record";
        case GatewayMode::replay: return "replay";
    }
    return "replay";
}

inline GatewayMode gateway_mode_from_string(const std::string& s) {
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    throw std::invalid_argument("unknown gateway mode: " + s);
}

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Replay-mode lookup failure: the fixture has no record for the request key.
class FixtureMiss : public std::runtime_error {
public:
    explicit FixtureMiss(const std::string& key)
        : std::runtime_error("no fixture record for request key " + key), key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Model never produced output matching the schema; keeps every raw attempt
// so the failure can be diagnosed from logs.
class SchemaViolation : public std::runtime_error {
public:
    SchemaViolation(std::string reason, std::vector<std::string> raw_outputs)
        : std::runtime_error(std::move(reason)), raw_outputs_(std::move(raw_outputs)) {}

    const std::vector<std::string>& raw_outputs() const { return raw_outputs_; }

private:
    std::vector<std::string> raw_outputs_;
};

// Shallow JSON shape check: required keys with a value kind and, for strings,
// an optional set of allowed values. Nested payloads are validated by callers.
struct JsonSchemaDescriptor {
    enum class Kind { string, number, boolean, array, object, any };

    struct Field {
        std::string key;
        Kind kind = Kind::any;
        std::vector<std::string> allowed;  // only meaningful for strings
        bool required = true;
    };

    std::vector<Field> fields;

    std::optional<std::string> check(const json& value) const {
        if (!value.is_object()) return "top-level value is not a JSON object";
        for (const auto& f : fields) {
            if (!value.contains(f.key)) {
                if (f.required) return "missing required key \"" + f.key + "\"";
                continue;
            }
            const json& v = value.at(f.key);
            switch (f.kind) {
                case Kind::string:
                    if (!v.is_string()) return "key \"" + f.key + "\" is not a string";
                    if (!f.allowed.empty()) {
                        const std::string s = v.get<std::string>();
                        bool ok = false;
                        for (const auto& a : f.allowed) ok = ok || a == s;
                        if (!ok) return "key \"" + f.key + "\" has unexpected value \"" + s + "\"";
                    }
                    break;
                case Kind::number:
                    if (!v.is_number()) return "key \"" + f.key + "\" is not a number";
                    break;
                case Kind::boolean:
                    if (!v.is_boolean()) return "key \"" + f.key + "\" is not a boolean";
                    break;
                case Kind::array:
                    if (!v.is_array()) return "key \"" + f.key + "\" is not an array";
                    break;
                case Kind::object:
                    if (!v.is_object()) return "key \"" + f.key + "\" is not an object";
                    break;
                case Kind::any: break;
            }
        }
        return std::nullopt;
    }
};

// Upstream chat-completions carrier. Implementations take the full request
// body (OpenAI-style) and return the parsed response body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual json send(const json& request_body) = 0;
};

// Builds the response body shape the gateway expects back from a transport.
inline json chat_response_body(const std::string& text, long prompt_tokens = 0,
                               long completion_tokens = 0) {
    return json{{"choices", json::array({json{{"message", json{{"role", "assistant"},
                                                                {"content", text}}}}})},
                {"usage", json{{"prompt_tokens", prompt_tokens},
                               {"completion_tokens", completion_tokens},
                               {"total_tokens", prompt_tokens + completion_tokens}}}};
}

struct GatewayConfig {
    GatewayMode mode = GatewayMode::replay;
    fs::path fixture_path;
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "LLM_API_KEY";
    double requests_per_second = 2.0;  // <= 0 disables throttling
    int max_retries = 3;
    std::chrono::milliseconds backoff_initial{250};
};

class Gateway {
public:
    explicit Gateway(GatewayConfig config, std::unique_ptr<Transport> transport = nullptr)
        : config_(std::move(config)), transport_(std::move(transport)) {
        if (config_.mode != GatewayMode::live && config_.fixture_path.empty())
            throw std::invalid_argument("record/replay mode requires a fixture path");
        if (config_.mode != GatewayMode::live && fs::exists(config_.fixture_path))
            load_fixture();
    }

    const GatewayConfig& config() const { return config_; }

    // Stable content hash over the semantic request fields. The canonical
    // serialization is key-sorted JSON, so field order in callers never
    // affects the key; any message byte change does.
    static std::string cache_key(const CompletionRequest& request) {
        json canon{{"model", request.model},
                   {"temperature", request.temperature},
                   {"messages", request.messages}};
        if (request.max_output_tokens) canon["max_output_tokens"] = *request.max_output_tokens;
        return detail::Sha256::hex_digest(canon.dump());
    }

    CompletionResponse complete(const CompletionRequest& request) {
        validate(request);
        const std::string key = cache_key(request);

        std::lock_guard<std::mutex> lock(mutex_);
        if (auto it = session_cache_.find(key); it != session_cache_.end()) {
            CompletionResponse r = it->second;
            r.cache_hit = true;
            return r;
        }
        if (config_.mode == GatewayMode::replay) {
            auto it = fixture_.find(key);
            if (it == fixture_.end()) throw FixtureMiss(key);
            CompletionResponse r = it->second;
            r.cache_hit = true;
            session_cache_[key] = it->second;
            return r;
        }
        if (config_.mode == GatewayMode::record) {
            if (auto it = fixture_.find(key); it != fixture_.end()) {
                CompletionResponse r = it->second;
                r.cache_hit = true;
                session_cache_[key] = it->second;
                return r;
            }
        }

        CompletionResponse response = call_upstream(request);
        session_cache_[key] = response;
        if (config_.mode == GatewayMode::record) {
            fixture_[key] = response;
            append_fixture_record(key, request, response);
        }
        return response;
    }

    // JSON-contract completion with bounded self-repair: strips code fences,
    // re-prompts with the format reminder, and surfaces every raw output on
    // exhaustion.
    json complete_json(const CompletionRequest& request, const JsonSchemaDescriptor& schema,
                       int max_repair_attempts = 2) {
        std::vector<std::string> raw_outputs;
        CompletionRequest attempt = request;
        for (int tries = 0; tries <= max_repair_attempts; ++tries) {
            const CompletionResponse response = complete(attempt);
            raw_outputs.push_back(response.text);
            const std::string cleaned = strip_code_fences(response.text);
            json parsed;
            bool parse_ok = true;
            try {
                parsed = json::parse(cleaned);
            } catch (const json::parse_error&) {
                parse_ok = false;
            }
            if (parse_ok) {
                if (auto err = schema.check(parsed); !err) return parsed;
            }
            attempt.messages.push_back({Role::assistant, response.text});
            attempt.messages.push_back(
                {Role::user, "Output only the JSON object and nothing else."});
        }
        throw SchemaViolation("model output failed schema validation after " +
                                  std::to_string(max_repair_attempts + 1) + " attempts",
                              raw_outputs);
    }

    static std::string strip_code_fences(const std::string& text) {
        std::string s(detail::trim(text));
        if (s.rfind("```", 0) != 0) return s;
        const std::size_t first_newline = s.find('\n');
        if (first_newline == std::string::npos) return s;
        s = s.substr(first_newline + 1);
        const std::size_t closing = s.rfind("```");
        if (closing != std::string::npos) s = s.substr(0, closing);
        return std::string(detail::trim(s));
    }

    std::size_t upstream_calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return upstream_calls_;
    }

private:
    static void validate(const CompletionRequest& request) {
        if (request.model.empty()) throw std::invalid_argument("model identifier is empty");
        if (request.temperature < 0.0) throw std::invalid_argument("temperature is negative");
        if (request.messages.empty()) throw std::invalid_argument("request has no messages");
        for (const auto& m : request.messages)
            if (m.content.empty()) throw std::invalid_argument("chat message content is empty");
        for (const auto& m : request.messages) {
            if (m.role == Role::system) continue;
            if (m.role != Role::user)
                throw std::invalid_argument("first non-system message must be from the user");
            break;
        }
    }

    CompletionResponse call_upstream(const CompletionRequest& request) {
        if (!transport_) throw NetworkError("no transport configured for live traffic");
        json body{{"model", request.model},
                  {"temperature", request.temperature},
                  {"messages", request.messages}};
        if (request.max_output_tokens) body["max_tokens"] = *request.max_output_tokens;

        std::string last_error;
        for (int attempt = 0; attempt < std::max(1, config_.max_retries); ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(config_.backoff_initial * (1 << (attempt - 1)));
            }
            throttle();
            try {
                const json reply = transport_->send(body);
                ++upstream_calls_;
                return parse_response_body(reply);
            } catch (const AuthError&) {
                throw;
            } catch (const NetworkError& e) {
                last_error = e.what();
            }
        }
        throw NetworkError("upstream call failed after " +
                           std::to_string(std::max(1, config_.max_retries)) +
                           " attempts: " + last_error);
    }

    static CompletionResponse parse_response_body(const json& body) {
        CompletionResponse response;
        try {
            response.text =
                body.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw NetworkError(std::string("malformed completion response: ") + e.what());
        }
        if (body.contains("usage") && body["usage"].is_object()) {
            for (const auto& [k, v] : body["usage"].items()) {
                if (v.is_number_integer() && v.get<long>() >= 0)
                    response.token_usage[k] = v.get<long>();
            }
        }
        return response;
    }

    void throttle() {
        if (config_.requests_per_second <= 0.0) return;
        using clock = std::chrono::steady_clock;
        const auto min_gap = std::chrono::duration_cast<clock::duration>(
            std::chrono::duration<double>(1.0 / config_.requests_per_second));
        const auto now = clock::now();
        if (last_upstream_ != clock::time_point{} && now - last_upstream_ < min_gap)
            std::this_thread::sleep_for(min_gap - (now - last_upstream_));
        last_upstream_ = clock::now();
    }

    void load_fixture() {
        for (const auto& record : load_jsonl(config_.fixture_path)) {
            const std::string key = record.at("key").get<std::string>();
            CompletionResponse response;
            response.text = record.at("response").at("text").get<std::string>();
            if (record["response"].contains("token_usage"))
                for (const auto& [k, v] : record["response"]["token_usage"].items())
                    response.token_usage[k] = v.get<long>();
            fixture_[key] = response;
        }
    }

    void append_fixture_record(const std::string& key, const CompletionRequest& request,
                               const CompletionResponse& response) {
        if (config_.fixture_path.has_parent_path())
            fs::create_directories(config_.fixture_path.parent_path());
        json record{{"key", key},
                    {"request",
                     {{"model", request.model},
                      {"temperature", request.temperature},
                      {"messages", request.messages}}},
                    {"response",
                     {{"text", response.text}, {"token_usage", response.token_usage}}}};
        std::ofstream out(config_.fixture_path, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot append to fixture: " + config_.fixture_path.string());
        out << record.dump() << '\n';
        out.flush();
    }

    GatewayConfig config_;
    std::unique_ptr<Transport> transport_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, CompletionResponse> session_cache_;
    std::unordered_map<std::string, CompletionResponse> fixture_;
    std::chrono::steady_clock::time_point last_upstream_{};
    std::size_t upstream_calls_ = 0;
};

}  // namespace rhetor
