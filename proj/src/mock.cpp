#include "labelscout/mock.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "labelscout/digest.hpp"
#include "labelscout/error.hpp"
#include "labelscout/text.hpp"

namespace labelscout::mock {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "the",  "and",   "for",   "are",   "was",   "were",  "this",  "that",  "these", "those",
        "with", "from",  "into",  "onto",  "over",  "under", "than",  "then",  "there", "their",
        "they", "them",  "his",   "her",   "its",   "our",   "your",  "you",   "she",   "him",
        "has",  "have",  "had",   "been",  "being", "but",   "not",   "nor",   "yet",   "all",
        "any",  "each",  "some",  "such",  "can",   "could", "would", "should", "will", "shall",
        "may",  "might", "must",  "also",  "very",  "just",  "only",  "about", "which", "what",
        "when", "where", "while", "who",   "whom",  "whose", "why",   "how",   "here",  "one",
        "two",  "out",   "off",   "per",   "via",   "upon",  "does",  "did",   "doing", "done"};
    return words;
}

struct TokenKey {
    std::string token;
    std::uint64_t seed;
    std::size_t dim;
    bool operator==(const TokenKey&) const = default;
};

struct TokenKeyHash {
    std::size_t operator()(const TokenKey& k) const {
        return std::hash<std::string>{}(k.token) ^ (k.seed * 0x9E3779B97F4A7C15ULL) ^ (k.dim << 1);
    }
};

std::vector<double> compute_token_vector(std::string_view token, std::uint64_t seed, std::size_t dim) {
    std::mt19937_64 rng(digest_prefix64(sha256(token)) ^ (seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
    auto uniform = [&] {
        // (0, 1]; 53 random bits
        return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    };
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        v[i] = r * std::cos(theta);
        if (i + 1 < dim) v[i + 1] = r * std::sin(theta);
    }
    return v;
}

}  // namespace

std::vector<double> token_vector(std::string_view token, std::uint64_t seed, std::size_t dim) {
    static std::mutex mu;
    static std::unordered_map<TokenKey, std::vector<double>, TokenKeyHash> memo;
    TokenKey key{std::string(token), seed, dim};
    {
        std::lock_guard lock(mu);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
    }
    auto v = compute_token_vector(token, seed, dim);
    std::lock_guard lock(mu);
    memo.emplace(std::move(key), v);
    return v;
}

EmbeddingVector embedding(std::string_view input, std::uint64_t seed, std::size_t dim) {
    std::vector<std::string> words;
    for (auto& tok : text::tokenize(text::to_lower(input))) {
        const bool punct_only = tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]));
        if (!punct_only) words.push_back(std::move(tok));
    }
    if (words.empty()) words.emplace_back(input);

    EmbeddingVector out;
    out.values.assign(dim, 0.0);
    for (const auto& w : words) {
        const auto v = token_vector(w, seed, dim);
        for (std::size_t i = 0; i < dim; ++i) out.values[i] += v[i];
    }
    double norm = 0.0;
    for (double x : out.values) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : out.values) x /= norm;
    }
    return out;
}

double entailment(std::string_view premise, std::string_view hypothesis, std::uint64_t seed) {
    const double c = std::clamp(cosine(embedding(premise, seed), embedding(hypothesis, seed)), -1.0, 1.0);
    return (1.0 + c) / 2.0;
}

std::string first_noun_like(std::string_view prompt) {
    std::string_view region = prompt;
    if (const auto open = prompt.find("\"\"\""); open != std::string_view::npos) {
        const auto body = open + 3;
        const auto close = prompt.find("\"\"\"", body);
        region = prompt.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
    }
    for (const auto& tok : text::tokenize(region)) {
        if (tok.size() < 3 || !text::is_word_token(tok)) continue;
        std::string lower = text::to_lower(tok);
        if (stopwords().contains(lower)) continue;
        return lower;
    }
    return {};
}

// ---------------------------------------------------------------------------

std::string Embedder::id() const {
    return "mock-embed:seed=" + std::to_string(seed_) + ":dim=" + std::to_string(dim_);
}

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embedding(t, seed_, dim_));
    return out;
}

std::string Entailment::id() const { return "mock-nli:seed=" + std::to_string(seed_); }

double Entailment::entail(const EntailmentQuery& q) { return entailment(q.premise, q.hypothesis, seed_); }

Generator::Generator(std::uint64_t seed, std::vector<Fixture> fixtures, std::optional<std::string> default_response)
    : seed_(seed), default_(std::move(default_response)) {
    for (auto& f : fixtures) add_fixture(std::move(f));
}

std::shared_ptr<Generator> Generator::from_file(const std::filesystem::path& path, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock fixture file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("mock fixture file " + path.string() + ": " + e.what());
    }
    auto g = std::make_shared<Generator>(seed);
    for (const auto& f : j.value("fixtures", json::array())) {
        Fixture fixture;
        if (f.contains("request_digest")) fixture.request_digest = f["request_digest"].get<std::string>();
        if (f.contains("contains")) fixture.contains = f["contains"].get<std::vector<std::string>>();
        fixture.response = f.at("response").get<std::string>();
        g->add_fixture(std::move(fixture));
    }
    if (j.contains("default")) g->default_ = j["default"].get<std::string>();
    return g;
}

void Generator::add_fixture(Fixture f) {
    std::lock_guard lock(mu_);
    json j = {{"contains", f.contains}, {"response", f.response}};
    if (f.request_digest) j["request_digest"] = *f.request_digest;
    fixture_digest_ = sha256_hex(fixture_digest_ + j.dump());
    fixtures_.push_back(std::move(f));
}

void Generator::set_default(std::optional<std::string> response) {
    std::lock_guard lock(mu_);
    default_ = std::move(response);
}

void Generator::add_exact(const GenerationRequest& req, std::string response) {
    add_fixture(Fixture{request_digest(req), {}, std::move(response)});
}

std::string Generator::id() const {
    std::lock_guard lock(mu_);
    std::string id = "mock-gen:seed=" + std::to_string(seed_);
    if (!fixture_digest_.empty()) id += ":fixtures=" + fixture_digest_.substr(0, 16);
    if (default_) id += ":default=" + sha256_hex(*default_).substr(0, 8);
    return id;
}

std::string Generator::generate(const GenerationRequest& req) {
    std::lock_guard lock(mu_);
    const std::string digest = request_digest(req);
    for (const auto& f : fixtures_) {
        if (f.request_digest) {
            if (*f.request_digest == digest) return f.response;
            continue;
        }
        const bool all = std::all_of(f.contains.begin(), f.contains.end(), [&](const std::string& needle) {
            return req.user_prompt.find(needle) != std::string::npos;
        });
        if (all) return f.response;
    }
    if (default_) return *default_;
    return first_noun_like(req.user_prompt);
}

}  // namespace labelscout::mock
