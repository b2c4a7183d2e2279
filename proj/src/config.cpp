#include "labelscout/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "labelscout/mock.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Object reader that rejects unknown keys and reports typed errors by path.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(label() + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + " has the wrong type");
        }
    }

    Section section(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, path(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) throw ConfigError("unknown config key " + path(k));
        }
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

private:
    std::string label() const { return where_.empty() ? "config" : where_; }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

BackendConfig read_backend(Section s, const fs::path& base) {
    BackendConfig b;
    b.type = s.get<std::string>("type", "mock");
    b.seed = s.get<std::uint64_t>("seed", 0);
    b.fixtures = resolve(base, s.get<std::string>("fixtures", ""));
    if (s.has("default")) b.default_response = s.get<std::string>("default", "");
    b.endpoint.base_url = s.get<std::string>("base_url", "");
    b.endpoint.model = s.get<std::string>("model", "");
    b.endpoint.api_key_env = s.get<std::string>("api_key_env", "");
    b.endpoint.timeout_seconds = s.get<double>("timeout_seconds", 60.0);
    b.endpoint.max_attempts = s.get<int>("max_attempts", 3);
    s.finish();
    return b;
}

json backend_json(const BackendConfig& b) {
    json j{{"type", b.type}};
    if (b.type == "mock") {
        j["seed"] = b.seed;
        if (!b.fixtures.empty()) j["fixtures"] = b.fixtures.string();
        if (b.default_response) j["default"] = *b.default_response;
    } else {
        j["base_url"] = b.endpoint.base_url;
        j["model"] = b.endpoint.model;
        if (!b.endpoint.api_key_env.empty()) j["api_key_env"] = b.endpoint.api_key_env;
        j["timeout_seconds"] = b.endpoint.timeout_seconds;
        j["max_attempts"] = b.endpoint.max_attempts;
    }
    return j;
}

void validate_backend(const BackendConfig& b, const std::string& role, bool generator) {
    if (b.type == "mock") {
        if (!b.fixtures.empty() && !generator) throw ConfigError("backends." + role + ": fixtures only apply to generators");
        if (!b.fixtures.empty() && !fs::exists(b.fixtures))
            throw ConfigError("backends." + role + ": fixture file not found: " + b.fixtures.string());
        return;
    }
    if (b.type != "http") throw ConfigError("backends." + role + ".type must be \"mock\" or \"http\"");
    if (b.endpoint.base_url.empty()) throw ConfigError("backends." + role + ".base_url is required for http");
    if (b.endpoint.model.empty() && role != "nli") throw ConfigError("backends." + role + ".model is required for http");
    if (b.endpoint.max_attempts < 1) throw ConfigError("backends." + role + ".max_attempts must be >= 1");
    if (!(b.endpoint.timeout_seconds > 0)) throw ConfigError("backends." + role + ".timeout_seconds must be > 0");
}

std::shared_ptr<TextGenerator> make_generator(const BackendConfig& b) {
    if (b.type == "http") return std::make_shared<http::ChatGenerator>(b.endpoint);
    if (!b.fixtures.empty()) {
        auto g = mock::Generator::from_file(b.fixtures, b.seed);
        if (b.default_response) g->set_default(b.default_response);  // config wins over the file
        return g;
    }
    return std::make_shared<mock::Generator>(b.seed, std::vector<mock::Fixture>{}, b.default_response);
}

std::shared_ptr<TextEmbedder> make_embedder(const BackendConfig& b) {
    if (b.type == "http") return std::make_shared<http::EmbeddingClient>(b.endpoint);
    return std::make_shared<mock::Embedder>(b.seed);
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    Section root(j, "");
    c.corpus = resolve(base_dir, root.get<std::string>("corpus", ""));
    c.objective = root.get<std::string>("objective", "");
    c.demonstrations = root.get<std::vector<std::string>>("demonstrations", {});
    c.run_dir = resolve(base_dir, root.get<std::string>("run_dir", ""));
    c.seed = root.get<std::uint64_t>("seed", 0);
    c.deterministic = root.get<bool>("deterministic", true);
    c.chunk_size = root.get<std::size_t>("chunk_size", kDefaultChunkSize);
    c.max_in_flight = root.get<std::size_t>("max_in_flight", 8);
    c.cache_dir = resolve(base_dir, root.get<std::string>("cache_dir", ""));
    c.prompts_dir = resolve(base_dir, root.get<std::string>("prompts_dir", ""));

    {
        auto s = root.section("discovery");
        auto& d = c.discovery;
        d.initial_subset = s.get<std::size_t>("initial_subset", 0);
        d.increment = s.get<std::size_t>("increment", 0);
        d.max_subset = s.get<std::size_t>("max_subset", 0);
        if (s.has("k_hint")) d.k_hint = s.get<long long>("k_hint", 0);
        d.reducer = reducer_from_string(s.get<std::string>("reducer", "pca"));
        d.target_dim = s.get<std::size_t>("target_dim", 10);
        d.external_reduction = resolve(base_dir, s.get<std::string>("external_reduction", ""));
        d.gmm_restarts = s.get<std::size_t>("gmm_restarts", 1);
        d.gmm_max_iter = s.get<std::size_t>("gmm_max_iter", 200);
        d.gmm_tol = s.get<double>("gmm_tol", 1e-6);
        d.exemplars = s.get<std::size_t>("exemplars", 3);
        s.finish();
    }
    {
        auto s = root.section("dedup");
        c.dedup.high_threshold = s.get<double>("high_threshold", 0.75);
        c.dedup.low_threshold = s.get<double>("low_threshold", 0.5);
        c.dedup.auto_judge = s.get<bool>("auto_judge", true);
        s.finish();
    }
    {
        auto s = root.section("classify");
        c.classify.max_ranks = s.get<std::size_t>("max_ranks", kDefaultMaxRanks);
        c.classify.templates.chunk = s.get<std::string>("chunk_template", kDefaultHypothesis);
        c.classify.templates.keyphrase = s.get<std::string>("keyphrase_template", c.classify.templates.chunk);
        c.classify_keyphrases = s.get<bool>("use_keyphrases", true);
        s.finish();
    }
    c.classify.chunk_size = c.chunk_size;
    {
        auto s = root.section("refine");
        auto& r = c.refine;
        r.subset_size = s.get<std::size_t>("subset_size", 500);
        r.keyphrase_min_count = s.get<std::size_t>("keyphrase_min_count", 15);
        r.longtail_fraction = s.get<double>("longtail_fraction", 0.01);
        r.iterations = s.get<std::size_t>("iterations", 3);
        r.freeze_fraction = s.get<double>("freeze_fraction", 0.25);
        r.min_support = s.get<std::size_t>("min_support", 1);
        s.finish();
    }
    {
        auto s = root.section("evaluate");
        auto& e = c.evaluate;
        e.k = s.get<std::vector<std::size_t>>("k", {1, 3});
        e.match_mode = match_mode_from_string(s.get<std::string>("match_mode", "covered"));
        e.judge_mode = judge_mode_from_string(s.get<std::string>("judge_mode", "llm"));
        e.gold_space = resolve(base_dir, s.get<std::string>("gold_space", ""));
        e.thresholds.high = s.get<double>("high_threshold", 0.75);
        e.thresholds.low = s.get<double>("low_threshold", 0.5);
        s.finish();
    }
    {
        auto s = root.section("probe");
        c.probe_sample = s.get<std::size_t>("sample", 100);
        s.finish();
    }
    {
        auto s = root.section("review");
        c.review.host = s.get<std::string>("host", "127.0.0.1");
        c.review.port = s.get<int>("port", 8765);
        c.review.token_env = s.get<std::string>("token_env", "");
        c.review.static_dir = resolve(base_dir, s.get<std::string>("static_dir", ""));
        s.finish();
    }
    {
        auto s = root.section("backends");
        c.generator = read_backend(s.section("generator"), base_dir);
        if (s.has("judge")) c.judge = read_backend(s.section("judge"), base_dir);
        c.embedder = read_backend(s.section("embedder"), base_dir);
        if (s.has("similarity")) c.similarity = read_backend(s.section("similarity"), base_dir);
        c.nli = read_backend(s.section("nli"), base_dir);
        s.finish();
    }
    root.finish();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
    json backends{{"generator", backend_json(generator)}, {"embedder", backend_json(embedder)},
                  {"nli", backend_json(nli)}};
    if (judge) backends["judge"] = backend_json(*judge);
    if (similarity) backends["similarity"] = backend_json(*similarity);
    json disc{{"initial_subset", discovery.initial_subset},
                   {"increment", discovery.increment},
                   {"max_subset", discovery.max_subset},
                   {"reducer", to_string(discovery.reducer)},
                   {"target_dim", discovery.target_dim},
                   {"gmm_restarts", discovery.gmm_restarts},
                   {"gmm_max_iter", discovery.gmm_max_iter},
                   {"gmm_tol", discovery.gmm_tol},
                   {"exemplars", discovery.exemplars}};
    if (discovery.k_hint) disc["k_hint"] = *discovery.k_hint;
    if (!discovery.external_reduction.empty()) disc["external_reduction"] = discovery.external_reduction.string();
    json out{
        {"corpus", corpus.string()},
        {"objective", objective},
        {"demonstrations", demonstrations},
        {"run_dir", run_dir.string()},
        {"seed", seed},
        {"deterministic", deterministic},
        {"chunk_size", chunk_size},
        {"max_in_flight", max_in_flight},
        {"discovery", disc},
        {"dedup",
         {{"high_threshold", dedup.high_threshold},
          {"low_threshold", dedup.low_threshold},
          {"auto_judge", dedup.auto_judge}}},
        {"classify",
         {{"max_ranks", classify.max_ranks},
          {"chunk_template", classify.templates.chunk},
          {"keyphrase_template", classify.templates.keyphrase},
          {"use_keyphrases", classify_keyphrases}}},
        {"refine",
         {{"subset_size", refine.subset_size},
          {"keyphrase_min_count", refine.keyphrase_min_count},
          {"longtail_fraction", refine.longtail_fraction},
          {"iterations", refine.iterations},
          {"freeze_fraction", refine.freeze_fraction},
          {"min_support", refine.min_support}}},
        {"evaluate",
         {{"k", evaluate.k},
          {"match_mode", evaluate.match_mode == MatchMode::exact ? "exact" : "covered"},
          {"judge_mode", evaluate.judge_mode == JudgeMode::llm ? "llm" : "off"},
          {"high_threshold", evaluate.thresholds.high},
          {"low_threshold", evaluate.thresholds.low}}},
        {"probe", {{"sample", probe_sample}}},
        {"review", {{"host", review.host}, {"port", review.port}, {"token_env", review.token_env}}},
        {"backends", backends}};
    if (!cache_dir.empty()) out["cache_dir"] = cache_dir.string();
    if (!prompts_dir.empty()) out["prompts_dir"] = prompts_dir.string();
    if (!evaluate.gold_space.empty()) out["evaluate"]["gold_space"] = evaluate.gold_space.string();
    if (!review.static_dir.empty()) out["review"]["static_dir"] = review.static_dir.string();
    return out;
}

void RunConfig::validate() const {
    if (corpus.empty()) throw ConfigError("corpus path is required");
    if (!fs::exists(corpus)) throw ConfigError("corpus file not found: " + corpus.string());
    if (text::trim(objective).empty()) throw ConfigError("objective must be non-empty");
    if (run_dir.empty()) throw ConfigError("run_dir is required");
    if (chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (!prompts_dir.empty() && !fs::is_directory(prompts_dir))
        throw ConfigError("prompts_dir is not a directory: " + prompts_dir.string());

    const auto& d = discovery;
    if (d.k_hint && *d.k_hint < 1) throw ConfigError("discovery.k_hint must be >= 1");
    if (d.target_dim < 2) throw ConfigError("discovery.target_dim must be >= 2");
    if (d.reducer == Reducer::external && d.external_reduction.empty())
        throw ConfigError("discovery.external_reduction is required with the external reducer");
    if (d.gmm_restarts < 1) throw ConfigError("discovery.gmm_restarts must be >= 1");
    if (d.exemplars < 1 || d.exemplars > 3) throw ConfigError("discovery.exemplars must be 1, 2 or 3");
    if (d.max_subset != 0 && d.initial_subset > d.max_subset)
        throw ConfigError("discovery.initial_subset exceeds discovery.max_subset");

    auto check_band = [](double low, double high, const std::string& where) {
        if (!(low >= 0.0 && low <= high && high <= 1.0))
            throw ConfigError(where + " thresholds must satisfy 0 <= low <= high <= 1");
    };
    check_band(dedup.low_threshold, dedup.high_threshold, "dedup");
    check_band(evaluate.thresholds.low, evaluate.thresholds.high, "evaluate");
    if (classify.max_ranks < 1) throw ConfigError("classify.max_ranks must be >= 1");
    if (classify.templates.chunk.find("{label}") == std::string::npos ||
        classify.templates.keyphrase.find("{label}") == std::string::npos)
        throw ConfigError("hypothesis templates must contain {label}");
    refine.validate();
    if (evaluate.k.empty()) throw ConfigError("evaluate.k must list at least one k");
    for (auto k : evaluate.k) {
        if (k < 1) throw ConfigError("evaluate.k values must be >= 1");
    }
    if (review.port < 0 || review.port > 65535) throw ConfigError("review.port out of range");

    validate_backend(generator, "generator", true);
    if (judge) validate_backend(*judge, "judge", true);
    validate_backend(embedder, "embedder", false);
    if (similarity) validate_backend(*similarity, "similarity", false);
    validate_backend(nli, "nli", false);
}

GatewayRoles make_roles(const RunConfig& c) {
    GatewayRoles roles;
    roles.generator = make_generator(c.generator);
    if (c.judge) roles.judge = make_generator(*c.judge);
    roles.embedder = make_embedder(c.embedder);
    if (c.similarity) roles.similarity = make_embedder(*c.similarity);
    if (c.nli.type == "http") {
        roles.nli = std::make_shared<http::EntailmentClient>(c.nli.endpoint);
    } else {
        roles.nli = std::make_shared<mock::Entailment>(c.nli.seed);
    }
    return roles;
}

}  // namespace labelscout
