#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "rhetor/gateway.hpp"
#include "support/case_studies.hpp"

using namespace rhetor;
using testsupport::FailingTransport;
using testsupport::ScriptedTransport;

namespace {

fs::path temp_dir() {
    const fs::path dir =
        fs::temp_directory_path() / ("rhetor_gw_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

CompletionRequest simple_request(const std::string& content) {
    CompletionRequest r;
    r.messages.push_back({Role::user, content});
    return r;
}

// Fails `failures` times, then succeeds.
class FlakyTransport : public Transport {
public:
    explicit FlakyTransport(int failures) : remaining_(failures) {}
    json send(const json&) override {
        if (remaining_-- > 0) throw NetworkError("transient failure");
        return chat_response_body("recovered");
    }

private:
    int remaining_;
};

}  // namespace

TEST_CASE("request defaults match the pipeline model") {
    CompletionRequest r;
    CHECK(r.model == "gpt-4o-mini");
    CHECK(r.temperature == 0.0);
    CHECK_FALSE(r.max_output_tokens.has_value());
}

TEST_CASE("cache key is stable and byte-sensitive") {
    const auto a = Gateway::cache_key(simple_request("hello"));
    const auto b = Gateway::cache_key(simple_request("hello"));
    CHECK(a == b);
    CHECK(a != Gateway::cache_key(simple_request("hello!")));

    CompletionRequest with_limit = simple_request("hello");
    with_limit.max_output_tokens = 64;
    CHECK(a != Gateway::cache_key(with_limit));

    CompletionRequest other_model = simple_request("hello");
    other_model.model = "gpt-4o";
    CHECK(a != Gateway::cache_key(other_model));
}

TEST_CASE("replay serves fixture records without a transport") {
    const fs::path fixture = temp_dir() / "replay.jsonl";
    const CompletionRequest request = simple_request("ping");
    const std::string key = Gateway::cache_key(request);
    {
        std::ofstream out(fixture);
        out << json{{"key", key},
                    {"request", json::object()},
                    {"response", {{"text", "hello"}, {"token_usage", json::object()}}}}
                   .dump()
            << "\n";
    }

    GatewayConfig config;
    config.mode = GatewayMode::replay;
    config.fixture_path = fixture;
    Gateway gateway(config, std::make_unique<FailingTransport>());

    const CompletionResponse response = gateway.complete(request);
    CHECK(response.text == "hello");
    CHECK(response.cache_hit);
    CHECK(gateway.upstream_calls() == 0);

    CHECK_THROWS_AS(gateway.complete(simple_request("unknown")), FixtureMiss);
}

TEST_CASE("byte-identical requests hit the session cache") {
    auto transport = std::make_unique<ScriptedTransport>();
    transport->when({"ping"}, "pong");
    GatewayConfig config;
    config.mode = GatewayMode::live;
    config.requests_per_second = 0.0;
    Gateway gateway(config, std::move(transport));

    const CompletionResponse first = gateway.complete(simple_request("ping"));
    CHECK(first.text == "pong");
    CHECK_FALSE(first.cache_hit);
    const CompletionResponse second = gateway.complete(simple_request("ping"));
    CHECK(second.text == "pong");
    CHECK(second.cache_hit);
    CHECK(gateway.upstream_calls() == 1);
}

TEST_CASE("record mode persists exchanges and replays them byte-identically") {
    const fs::path fixture = temp_dir() / "record.jsonl";
    if (fs::exists(fixture)) fs::remove(fixture);
    {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({"alpha"}, "first answer");
        transport->when({"beta"}, "second answer");
        GatewayConfig config;
        config.mode = GatewayMode::record;
        config.fixture_path = fixture;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        gateway.complete(simple_request("alpha"));
        gateway.complete(simple_request("beta"));
    }
    const auto records = load_jsonl(fixture);
    REQUIRE(records.size() == 2);
    CHECK(records[0].at("response").at("text") == "first answer");

    auto replay_once = [&](const std::string& content) {
        GatewayConfig config;
        config.mode = GatewayMode::replay;
        config.fixture_path = fixture;
        Gateway gateway(config, std::make_unique<FailingTransport>());
        return gateway.complete(simple_request(content)).text;
    };
    CHECK(replay_once("alpha") == "first answer");
    CHECK(replay_once("alpha") == replay_once("alpha"));
    CHECK(replay_once("beta") == "second answer");
}

TEST_CASE("record mode reuses existing fixture records instead of re-calling") {
    const fs::path fixture = temp_dir() / "record_reuse.jsonl";
    if (fs::exists(fixture)) fs::remove(fixture);
    for (int round = 0; round < 2; ++round) {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({"alpha"}, "answer");
        GatewayConfig config;
        config.mode = GatewayMode::record;
        config.fixture_path = fixture;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        gateway.complete(simple_request("alpha"));
        CHECK(gateway.upstream_calls() == (round == 0 ? 1 : 0));
    }
    CHECK(load_jsonl(fixture).size() == 1);
}

TEST_CASE("request validation rejects malformed message sequences") {
    GatewayConfig config;
    config.mode = GatewayMode::live;
    Gateway gateway(config, std::make_unique<FailingTransport>());

    CompletionRequest empty_content;
    empty_content.messages.push_back({Role::user, ""});
    CHECK_THROWS_AS(gateway.complete(empty_content), std::invalid_argument);

    CompletionRequest assistant_first;
    assistant_first.messages.push_back({Role::system, "be helpful"});
    assistant_first.messages.push_back({Role::assistant, "hello"});
    CHECK_THROWS_AS(gateway.complete(assistant_first), std::invalid_argument);

    CompletionRequest no_model = simple_request("hi");
    no_model.model = "";
    CHECK_THROWS_AS(gateway.complete(no_model), std::invalid_argument);
}

TEST_CASE("transient failures are retried with backoff, then surface") {
    GatewayConfig config;
    config.mode = GatewayMode::live;
    config.max_retries = 3;
    config.backoff_initial = std::chrono::milliseconds(1);
    config.requests_per_second = 0.0;
    {
        Gateway gateway(config, std::make_unique<FlakyTransport>(2));
        CHECK(gateway.complete(simple_request("retry me")).text == "recovered");
    }
    {
        Gateway gateway(config, std::make_unique<FlakyTransport>(5));
        CHECK_THROWS_AS(gateway.complete(simple_request("retry me")), NetworkError);
    }
}

TEST_CASE("complete_json validates, strips fences, and repairs") {
    SECTION("valid label object parses") {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({"label me"}, R"({"result": "Order/Summary"})");
        GatewayConfig config;
        config.mode = GatewayMode::live;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        JsonSchemaDescriptor schema;
        schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::string, {}, true});
        const json parsed = gateway.complete_json(simple_request("label me"), schema, 2);
        CHECK(parsed.at("result") == "Order/Summary");
    }
    SECTION("code fences are stripped") {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({"label me"}, "```json\n{\"result\": \"Order/Summary\"}\n```");
        GatewayConfig config;
        config.mode = GatewayMode::live;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        JsonSchemaDescriptor schema;
        schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::string, {}, true});
        const json parsed = gateway.complete_json(simple_request("label me"), schema, 2);
        CHECK(parsed.at("result") == "Order/Summary");
    }
    SECTION("repair instruction recovers a malformed first answer") {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({"Output only the JSON object"}, R"({"result": "fixed"})");
        transport->when({"label me"}, "Sure! Here you go: result = Order/Summary");
        GatewayConfig config;
        config.mode = GatewayMode::live;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        JsonSchemaDescriptor schema;
        schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::string, {}, true});
        const json parsed = gateway.complete_json(simple_request("label me"), schema, 2);
        CHECK(parsed.at("result") == "fixed");
        CHECK(gateway.upstream_calls() == 2);
    }
    SECTION("exhausted repairs throw with all raw outputs") {
        auto transport = std::make_unique<ScriptedTransport>();
        transport->when({}, "not json at all");
        GatewayConfig config;
        config.mode = GatewayMode::live;
        config.requests_per_second = 0.0;
        Gateway gateway(config, std::move(transport));
        JsonSchemaDescriptor schema;
        schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::string, {}, true});
        try {
            gateway.complete_json(simple_request("label me"), schema, 2);
            FAIL("expected SchemaViolation");
        } catch (const SchemaViolation& e) {
            CHECK(e.raw_outputs().size() == 3);
        }
    }
    SECTION("schema rejects wrong value domains") {
        JsonSchemaDescriptor schema;
        schema.fields.push_back(
            {"label", JsonSchemaDescriptor::Kind::string, {"true", "false"}, true});
        CHECK_FALSE(schema.check(json{{"label", "true"}}).has_value());
        CHECK(schema.check(json{{"label", "maybe"}}).has_value());
        CHECK(schema.check(json{{"other", 1}}).has_value());
        CHECK(schema.check(json::array()).has_value());
    }
}

TEST_CASE("replay mode requires a fixture path") {
    GatewayConfig config;
    config.mode = GatewayMode::replay;
    CHECK_THROWS_AS(Gateway(config), std::invalid_argument);
}
