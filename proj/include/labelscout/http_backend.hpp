#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "labelscout/gateway.hpp"

namespace labelscout::http {

struct Endpoint {
    std::string base_url;     // e.g. "https://host/v1"; for NLI the full endpoint URL
    std::string model;
    std::string api_key_env;  // name of the environment variable holding a bearer token
    double timeout_seconds = 60.0;
    int max_attempts = 3;
    std::chrono::milliseconds backoff{500};
};

/// POSTs JSON with bounded retries: transport failures and 5xx responses
/// are retried with exponential backoff; 4xx responses are not.
class JsonTransport {
public:
    explicit JsonTransport(Endpoint endpoint);
    nlohmann::json post(const std::string& path_suffix, const nlohmann::json& body) const;
    const Endpoint& endpoint() const noexcept { return endpoint_; }

private:
    Endpoint endpoint_;
    std::string origin_;  // scheme://host[:port]
    std::string prefix_;  // path part of base_url
};

/// OpenAI-compatible chat completions (`<base>/chat/completions`).
class ChatGenerator : public TextGenerator {
public:
    explicit ChatGenerator(Endpoint endpoint) : transport_(std::move(endpoint)) {}
    std::string id() const override;
    std::string generate(const GenerationRequest& req) override;

private:
    JsonTransport transport_;
};

/// OpenAI-compatible embeddings (`<base>/embeddings`).
class EmbeddingClient : public TextEmbedder {
public:
    explicit EmbeddingClient(Endpoint endpoint, std::size_t batch = 64)
        : transport_(std::move(endpoint)), batch_(batch) {}
    std::string id() const override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::size_t max_batch() const override { return batch_; }

private:
    JsonTransport transport_;
    std::size_t batch_;
};

/// POST {premise, hypothesis} -> {entailment: real}.
class EntailmentClient : public EntailmentScorer {
public:
    explicit EntailmentClient(Endpoint endpoint) : transport_(std::move(endpoint)) {}
    std::string id() const override;
    double entail(const EntailmentQuery& q) override;

private:
    JsonTransport transport_;
};

}  // namespace labelscout::http
