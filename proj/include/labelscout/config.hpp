#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelscout/classifier.hpp"
#include "labelscout/cluster.hpp"
#include "labelscout/eval.hpp"
#include "labelscout/gateway.hpp"
#include "labelscout/http_backend.hpp"
#include "labelscout/labelspace.hpp"
#include "labelscout/refine.hpp"

namespace labelscout {

/// One backend role. `type` is "mock" or "http".
struct BackendConfig {
    std::string type = "mock";
    std::uint64_t seed = 0;                    // mock
    std::filesystem::path fixtures;            // mock generator, optional
    std::optional<std::string> default_response;  // mock generator, optional
    http::Endpoint endpoint;                   // http
};

struct DiscoveryConfig {
    std::size_t initial_subset = 0;  // 0: whole corpus
    std::size_t increment = 0;       // 0: no growth
    std::size_t max_subset = 0;      // 0: whole corpus
    std::optional<long long> k_hint;
    Reducer reducer = Reducer::pca;
    std::size_t target_dim = 10;
    std::filesystem::path external_reduction;
    std::size_t gmm_restarts = 1;
    std::size_t gmm_max_iter = 200;
    double gmm_tol = 1e-6;
    std::size_t exemplars = 3;
};

struct EvaluateConfig {
    std::vector<std::size_t> k = {1, 3};
    MatchMode match_mode = MatchMode::covered;
    JudgeMode judge_mode = JudgeMode::llm;
    std::filesystem::path gold_space;  // newline-separated names; default: union of corpus gold labels
    CoverageThresholds thresholds;
};

struct ReviewConfig {
    std::string host = "127.0.0.1";
    int port = 8765;
    std::string token_env;  // bearer token variable; empty disables auth
    std::filesystem::path static_dir;
};

struct RunConfig {
    std::filesystem::path corpus;
    std::string objective;
    std::vector<std::string> demonstrations;
    std::filesystem::path run_dir;
    std::uint64_t seed = 0;
    bool deterministic = true;
    std::size_t chunk_size = kDefaultChunkSize;
    std::size_t max_in_flight = 8;
    std::filesystem::path cache_dir;    // default: <run_dir>/cache
    std::filesystem::path prompts_dir;  // optional template overrides

    DiscoveryConfig discovery;
    DedupOptions dedup;
    ClassifyOptions classify;
    bool classify_keyphrases = true;
    RefineConfig refine;
    EvaluateConfig evaluate;
    std::size_t probe_sample = 100;
    ReviewConfig review;

    BackendConfig generator;
    std::optional<BackendConfig> judge;
    BackendConfig embedder;
    std::optional<BackendConfig> similarity;
    BackendConfig nli;

    /// Relative paths resolve against `base_dir`. Unknown keys are a ConfigError.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Checks every field; runs before any backend is contacted.
    void validate() const;
};

/// Builds the gateway roles described by the config.
GatewayRoles make_roles(const RunConfig& config);

}  // namespace labelscout
