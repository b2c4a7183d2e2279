#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace labelscout {

struct GenerationRequest {
    std::string system_prompt;
    std::string user_prompt;
    int max_tokens = 256;
    double temperature = 0.0;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim() const noexcept { return values.size(); }
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
/// Cosine similarity; 0 when either vector has zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct EntailmentQuery {
    std::string premise;
    std::string hypothesis;
};

enum class Capability { generate, embed, entail };

std::string_view to_string(Capability c);
Capability capability_from_string(std::string_view s);

/// Content-addressed cache key. `digest` is the hex SHA-256 of the
/// canonical serialization of (backend id, capability, request).
struct CacheKey {
    std::string backend_id;
    Capability capability = Capability::generate;
    std::string digest;
};

/// Canonical request serialization: sorted fields, prompts with whitespace
/// runs collapsed. Backend independent; mock fixtures are keyed by its digest.
std::string canonical_request(const GenerationRequest& req);
std::string request_digest(const GenerationRequest& req);

CacheKey make_key(std::string_view backend_id, const GenerationRequest& req);
CacheKey make_key(std::string_view backend_id, std::string_view embed_text);
CacheKey make_key(std::string_view backend_id, const EntailmentQuery& q);

// ---------------------------------------------------------------------------
// Backend interfaces. Implementations must be safe to call concurrently.

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string id() const = 0;
    virtual std::string generate(const GenerationRequest& req) = 0;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::string id() const = 0;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
    virtual std::size_t max_batch() const { return 64; }
};

class EntailmentScorer {
public:
    virtual ~EntailmentScorer() = default;
    virtual std::string id() const = 0;
    virtual double entail(const EntailmentQuery& q) = 0;
};

class ResponseCache;

enum class Role { generator, judge, embedder, similarity, nli };
std::string_view to_string(Role r);

struct GatewayRoles {
    std::shared_ptr<TextGenerator> generator;
    std::shared_ptr<TextGenerator> judge;        // defaults to generator when unset
    std::shared_ptr<TextEmbedder> embedder;
    std::shared_ptr<TextEmbedder> similarity;    // defaults to embedder when unset
    std::shared_ptr<EntailmentScorer> nli;
};

struct GatewayOptions {
    std::size_t max_in_flight = 8;
    bool deterministic = true;  // forces temperature 0 on generation
};

struct CapabilityCounters {
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
};

struct GatewayCounters {
    CapabilityCounters generate;
    CapabilityCounters embed;
    CapabilityCounters entail;
    std::size_t backend_calls() const {
        return generate.backend_calls + embed.backend_calls + entail.backend_calls;
    }
    std::size_t cache_hits() const { return generate.cache_hits + embed.cache_hits + entail.cache_hits; }
};

enum class CacheScope { all, generate, embed, entail };

/// Uniform, cached access to generation, embedding and entailment backends.
///
/// Every backend response is stored in the cache before it is returned, and
/// cache hits return the stored bytes unchanged. Identical requests in flight
/// at the same time are coalesced into one backend call. Backend parallelism
/// is bounded by `max_in_flight`.
class ModelGateway {
public:
    ModelGateway(GatewayRoles roles, std::shared_ptr<ResponseCache> cache, GatewayOptions options = {});
    ~ModelGateway();

    ModelGateway(const ModelGateway&) = delete;
    ModelGateway& operator=(const ModelGateway&) = delete;

    std::string generate(const GenerationRequest& req, Role role = Role::generator);

    /// Output order matches input order. Any failed batch fails the whole call.
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, Role role = Role::embedder);
    EmbeddingVector embed_one(const std::string& text, Role role = Role::embedder);

    double entail(const EntailmentQuery& q);
    /// Scores every query; misses are issued concurrently.
    std::vector<double> entail_batch(std::span<const EntailmentQuery> queries);

    std::size_t flush_cache(CacheScope scope);

    GatewayCounters counters() const;
    void reset_counters();

    bool has_role(Role role) const;
    std::string backend_id(Role role) const;
    const GatewayOptions& options() const noexcept { return options_; }
    ResponseCache& cache() { return *cache_; }

private:
    std::string cached_call(const CacheKey& key, const std::function<std::string()>& compute);
    TextGenerator& generator_for(Role role) const;
    TextEmbedder& embedder_for(Role role) const;
    CapabilityCounters& counters_for(Capability c);

    GatewayRoles roles_;
    std::shared_ptr<ResponseCache> cache_;
    GatewayOptions options_;
    std::counting_semaphore<1024> slots_;

    mutable std::mutex counters_mu_;
    GatewayCounters counters_;

    std::mutex inflight_mu_;
    std::unordered_map<std::string, std::shared_future<std::string>> inflight_;
};

}  // namespace labelscout
