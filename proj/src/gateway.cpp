#include "labelscout/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include <json.hpp>

#include "labelscout/cache.hpp"
#include "labelscout/digest.hpp"
#include "labelscout/error.hpp"
#include "labelscout/parallel.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw ShapeError("embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
    return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

std::string_view to_string(Capability c) {
    switch (c) {
        case Capability::generate: return "generate";
        case Capability::embed: return "embed";
        case Capability::entail: return "entail";
    }
    return "?";
}

Capability capability_from_string(std::string_view s) {
    if (s == "generate") return Capability::generate;
    if (s == "embed") return Capability::embed;
    if (s == "entail") return Capability::entail;
    throw DataError("unknown capability \"" + std::string(s) + "\"");
}

std::string_view to_string(Role r) {
    switch (r) {
        case Role::generator: return "generator";
        case Role::judge: return "judge";
        case Role::embedder: return "embedder";
        case Role::similarity: return "similarity";
        case Role::nli: return "nli";
    }
    return "?";
}

std::string canonical_request(const GenerationRequest& req) {
    json j = {{"max_tokens", req.max_tokens},
              {"system_prompt", text::collapse_whitespace(req.system_prompt)},
              {"temperature", req.temperature},
              {"user_prompt", text::collapse_whitespace(req.user_prompt)}};
    return j.dump();
}

std::string request_digest(const GenerationRequest& req) { return sha256_hex(canonical_request(req)); }

namespace {

CacheKey key_for(std::string_view backend_id, Capability c, const std::string& canonical) {
    json j = {{"backend", backend_id}, {"capability", to_string(c)}, {"request", canonical}};
    return CacheKey{std::string(backend_id), c, sha256_hex(j.dump())};
}

std::string encode_vector(const EmbeddingVector& v) { return json(v.values).dump(); }

EmbeddingVector decode_vector(const std::string& payload) {
    EmbeddingVector v;
    v.values = json::parse(payload).get<std::vector<double>>();
    return v;
}

}  // namespace

CacheKey make_key(std::string_view backend_id, const GenerationRequest& req) {
    return key_for(backend_id, Capability::generate, canonical_request(req));
}

CacheKey make_key(std::string_view backend_id, std::string_view embed_text) {
    return key_for(backend_id, Capability::embed, json{{"text", embed_text}}.dump());
}

CacheKey make_key(std::string_view backend_id, const EntailmentQuery& q) {
    return key_for(backend_id, Capability::entail,
                   json{{"hypothesis", q.hypothesis}, {"premise", q.premise}}.dump());
}

// ---------------------------------------------------------------------------

ModelGateway::ModelGateway(GatewayRoles roles, std::shared_ptr<ResponseCache> cache, GatewayOptions options)
    : roles_(std::move(roles)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(options),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024))) {
    if (!roles_.judge) roles_.judge = roles_.generator;
    if (!roles_.similarity) roles_.similarity = roles_.embedder;
}

ModelGateway::~ModelGateway() = default;

bool ModelGateway::has_role(Role role) const {
    switch (role) {
        case Role::generator: return roles_.generator != nullptr;
        case Role::judge: return roles_.judge != nullptr;
        case Role::embedder: return roles_.embedder != nullptr;
        case Role::similarity: return roles_.similarity != nullptr;
        case Role::nli: return roles_.nli != nullptr;
    }
    return false;
}

std::string ModelGateway::backend_id(Role role) const {
    switch (role) {
        case Role::generator:
        case Role::judge: return generator_for(role).id();
        case Role::embedder:
        case Role::similarity: return embedder_for(role).id();
        case Role::nli:
            if (!roles_.nli) throw ConfigError("no entailment backend configured");
            return roles_.nli->id();
    }
    return {};
}

TextGenerator& ModelGateway::generator_for(Role role) const {
    const auto& ptr = role == Role::judge ? roles_.judge : roles_.generator;
    if (!ptr) throw ConfigError("no generation backend configured for role " + std::string(to_string(role)));
    return *ptr;
}

TextEmbedder& ModelGateway::embedder_for(Role role) const {
    const auto& ptr = role == Role::similarity ? roles_.similarity : roles_.embedder;
    if (!ptr) throw ConfigError("no embedding backend configured for role " + std::string(to_string(role)));
    return *ptr;
}

CapabilityCounters& ModelGateway::counters_for(Capability c) {
    switch (c) {
        case Capability::generate: return counters_.generate;
        case Capability::embed: return counters_.embed;
        case Capability::entail: return counters_.entail;
    }
    return counters_.generate;
}

std::string ModelGateway::cached_call(const CacheKey& key, const std::function<std::string()>& compute) {
    if (auto hit = cache_->get(key)) {
        std::lock_guard lock(counters_mu_);
        ++counters_for(key.capability).cache_hits;
        return *hit;
    }

    std::promise<std::string> promise;
    std::shared_future<std::string> waiting;
    {
        std::lock_guard lock(inflight_mu_);
        if (auto it = inflight_.find(key.digest); it != inflight_.end()) {
            waiting = it->second;
        } else {
            // Re-check: another caller may have finished between our miss and this lock.
            if (auto hit = cache_->get(key)) {
                std::lock_guard clock(counters_mu_);
                ++counters_for(key.capability).cache_hits;
                return *hit;
            }
            inflight_.emplace(key.digest, promise.get_future().share());
        }
    }
    if (waiting.valid()) {
        std::string value = waiting.get();
        std::lock_guard lock(counters_mu_);
        ++counters_for(key.capability).cache_hits;
        return value;
    }

    auto finish = [&] {
        std::lock_guard lock(inflight_mu_);
        inflight_.erase(key.digest);
    };
    try {
        {
            std::lock_guard lock(counters_mu_);
            ++counters_for(key.capability).backend_calls;
        }
        slots_.acquire();
        std::string value;
        try {
            value = compute();
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        cache_->put(key, value);
        promise.set_value(value);
        finish();
        return value;
    } catch (...) {
        promise.set_exception(std::current_exception());
        finish();
        throw;
    }
}

std::string ModelGateway::generate(const GenerationRequest& req, Role role) {
    if (text::trim(req.system_prompt).empty() || text::trim(req.user_prompt).empty())
        throw ConfigError("generation prompts must be non-empty");
    if (req.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    GenerationRequest effective = req;
    if (options_.deterministic) effective.temperature = 0.0;
    TextGenerator& backend = generator_for(role);
    return cached_call(make_key(backend.id(), effective), [&] { return backend.generate(effective); });
}

std::vector<EmbeddingVector> ModelGateway::embed(std::span<const std::string> texts, Role role) {
    if (texts.empty()) throw ConfigError("embed requires a non-empty list");
    TextEmbedder& backend = embedder_for(role);
    const std::string id = backend.id();

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const CacheKey key = make_key(id, texts[i]);
        if (auto hit = cache_->get(key)) {
            out[i] = decode_vector(*hit);
            std::lock_guard lock(counters_mu_);
            ++counters_.embed.cache_hits;
        } else {
            missing.push_back(i);
        }
    }

    // Duplicate texts within one call are fetched once.
    std::vector<std::size_t> unique_missing;
    std::unordered_map<std::string_view, std::size_t> first_seen;
    for (std::size_t i : missing) {
        if (first_seen.emplace(texts[i], i).second) unique_missing.push_back(i);
    }

    const std::size_t batch = std::max<std::size_t>(1, backend.max_batch());
    std::optional<std::size_t> dim;
    for (std::size_t start = 0; start < unique_missing.size(); start += batch) {
        const std::size_t end = std::min(start + batch, unique_missing.size());
        std::vector<std::string> chunk;
        for (std::size_t j = start; j < end; ++j) chunk.push_back(texts[unique_missing[j]]);
        {
            std::lock_guard lock(counters_mu_);
            ++counters_.embed.backend_calls;
        }
        slots_.acquire();
        std::vector<EmbeddingVector> vecs;
        try {
            vecs = backend.embed(chunk);
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        if (vecs.size() != chunk.size())
            throw ContractViolation("embedder returned " + std::to_string(vecs.size()) + " vectors for " +
                                    std::to_string(chunk.size()) + " inputs");
        for (std::size_t j = 0; j < vecs.size(); ++j) {
            const auto& v = vecs[j];
            if (v.dim() == 0) throw ContractViolation("embedder returned an empty vector");
            if (!dim) dim = v.dim();
            if (v.dim() != *dim) throw ContractViolation("embedder returned inconsistent dimensions");
            for (double x : v.values) {
                if (!std::isfinite(x)) throw ContractViolation("embedder returned a non-finite value");
            }
            const std::size_t idx = unique_missing[start + j];
            cache_->put(make_key(id, texts[idx]), encode_vector(v));
            out[idx] = v;
        }
    }
    for (std::size_t i : missing) {
        if (out[i].values.empty()) out[i] = out[first_seen.at(texts[i])];
    }
    return out;
}

EmbeddingVector ModelGateway::embed_one(const std::string& text, Role role) {
    return embed(std::span<const std::string>(&text, 1), role).front();
}

double ModelGateway::entail(const EntailmentQuery& q) {
    if (q.premise.empty() || q.hypothesis.empty()) throw ConfigError("entailment premise and hypothesis must be non-empty");
    if (!roles_.nli) throw ConfigError("no entailment backend configured");
    EntailmentScorer& backend = *roles_.nli;
    const std::string payload = cached_call(make_key(backend.id(), q), [&] {
        const double p = backend.entail(q);
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
            throw ContractViolation("entailment backend returned a non-probability: " + std::to_string(p));
        return json(p).dump();
    });
    return json::parse(payload).get<double>();
}

std::vector<double> ModelGateway::entail_batch(std::span<const EntailmentQuery> queries) {
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), options_.max_in_flight, [&](std::size_t i) { out[i] = entail(queries[i]); });
    return out;
}

std::size_t ModelGateway::flush_cache(CacheScope scope) { return cache_->flush(scope); }

GatewayCounters ModelGateway::counters() const {
    std::lock_guard lock(counters_mu_);
    return counters_;
}

void ModelGateway::reset_counters() {
    std::lock_guard lock(counters_mu_);
    counters_ = {};
}

}  // namespace labelscout
