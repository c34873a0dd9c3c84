#pragma once

#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "rhetor/evaluation.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/jsonl.hpp"

namespace rhetor {

struct PipelineConfig {
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    GatewayMode mode = GatewayMode::replay;
    fs::path fixture_path;
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "LLM_API_KEY";
    fs::path prompt_dir;      // empty = embedded templates
    fs::path splitter_rules;  // optional JSON rule files
    fs::path metadata_rules;
    fs::path citation_rules;
    std::string feature_id = "punitive_component";
    SplitConfig split;  // defaults 15/35
    fs::path output_dir = "out";
    int parallelism = 1;
    double requests_per_second = 0.0;  // unthrottled by default (hermetic runs)
    unsigned seed = 0;
    double p_positive = 0.4;  // random-baseline positive rate
    int max_iterations = 8;

    GatewayConfig gateway_config() const {
        GatewayConfig g;
        g.mode = mode;
        g.fixture_path = fixture_path;
        g.base_url = base_url;
        g.api_key_env = api_key_env;
        g.requests_per_second = requests_per_second;
        return g;
    }

    // Referenced paths must exist up front so a long run cannot fail late on
    // a typo.
    void validate() const {
        if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
        if (mode != GatewayMode::live && fixture_path.empty())
            throw std::invalid_argument("record/replay mode requires a fixture path");
        if (mode == GatewayMode::replay && !fs::exists(fixture_path))
            throw std::invalid_argument("fixture file does not exist: " + fixture_path.string());
        if (!prompt_dir.empty() && !fs::is_directory(prompt_dir))
            throw std::invalid_argument("prompt directory does not exist: " +
                                        prompt_dir.string());
        for (const fs::path* p : {&splitter_rules, &metadata_rules, &citation_rules})
            if (!p->empty() && !fs::exists(*p))
                throw std::invalid_argument("rule file does not exist: " + p->string());
        if (split.train_size <= 0 || split.test_size <= 0)
            throw std::invalid_argument("split sizes must be positive");
    }

    static PipelineConfig from_json(const json& j);
    static PipelineConfig from_file(const fs::path& path);
};

namespace detail {

// ${VAR} interpolation for string config values; unknown variables are a
// configuration error, not an empty string.
inline std::string interpolate_env(const std::string& value) {
    std::string out;
    std::size_t pos = 0;
    while (pos < value.size()) {
        const std::size_t open = value.find("${", pos);
        if (open == std::string::npos) {
            out += value.substr(pos);
            break;
        }
        const std::size_t close = value.find('}', open + 2);
        if (close == std::string::npos) {
            out += value.substr(pos);
            break;
        }
        out += value.substr(pos, open - pos);
        const std::string name = value.substr(open + 2, close - open - 2);
        const char* v = std::getenv(name.c_str());
        if (v == nullptr)
            throw std::runtime_error("config references unset environment variable: " + name);
        out += v;
        pos = close + 1;
    }
    return out;
}

inline std::string config_string(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    return interpolate_env(j.at(key).get<std::string>());
}

}  // namespace detail

inline PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    c.model = detail::config_string(j, "model", c.model);
    if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
    if (j.contains("mode")) c.mode = gateway_mode_from_string(j["mode"].get<std::string>());
    c.fixture_path = detail::config_string(j, "fixture_path", c.fixture_path.string());
    c.base_url = detail::config_string(j, "base_url", c.base_url);
    c.api_key_env = detail::config_string(j, "api_key_env", c.api_key_env);
    c.prompt_dir = detail::config_string(j, "prompt_dir", c.prompt_dir.string());
    c.splitter_rules = detail::config_string(j, "splitter_rules", c.splitter_rules.string());
    c.metadata_rules = detail::config_string(j, "metadata_rules", c.metadata_rules.string());
    c.citation_rules = detail::config_string(j, "citation_rules", c.citation_rules.string());
    c.feature_id = detail::config_string(j, "feature_id", c.feature_id);
    if (j.contains("train_size")) c.split.train_size = j["train_size"].get<int>();
    if (j.contains("test_size")) c.split.test_size = j["test_size"].get<int>();
    if (j.contains("split_seed")) c.split.seed = j["split_seed"].get<unsigned>();
    c.output_dir = detail::config_string(j, "output_dir", c.output_dir.string());
    if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<int>();
    if (j.contains("requests_per_second"))
        c.requests_per_second = j["requests_per_second"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<unsigned>();
    if (j.contains("p_positive")) c.p_positive = j["p_positive"].get<double>();
    if (j.contains("max_iterations")) c.max_iterations = j["max_iterations"].get<int>();
    return c;
}

inline PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace rhetor
