#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "labelscout/gateway.hpp"

namespace labelscout::mock {

inline constexpr std::size_t kMockDim = 64;

/// Seeded standard-normal vector for one token. Pure function of (token, seed).
std::vector<double> token_vector(std::string_view token, std::uint64_t seed, std::size_t dim = kMockDim);

/// Mock embedding: unit-normalized sum of the token vectors of the text's
/// word tokens (lowercased, punctuation dropped). A text without word tokens
/// is treated as one token. Pure function of (text, seed).
EmbeddingVector embedding(std::string_view text, std::uint64_t seed, std::size_t dim = kMockDim);

/// Mock entailment: (1 + cosine(embed(premise), embed(hypothesis))) / 2.
double entailment(std::string_view premise, std::string_view hypothesis, std::uint64_t seed);

/// First noun-like token (alphabetic, at least 3 letters, not a stopword) of
/// the first `"""`-delimited block of `prompt`, or of the whole prompt when no
/// block exists. Lowercased. Empty when none is found.
std::string first_noun_like(std::string_view prompt);

class Embedder : public TextEmbedder {
public:
    explicit Embedder(std::uint64_t seed, std::size_t dim = kMockDim) : seed_(seed), dim_(dim) {}
    std::string id() const override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    std::uint64_t seed_;
    std::size_t dim_;
};

class Entailment : public EntailmentScorer {
public:
    explicit Entailment(std::uint64_t seed) : seed_(seed) {}
    std::string id() const override;
    double entail(const EntailmentQuery& q) override;

private:
    std::uint64_t seed_;
};

/// One fixture. A fixture with `request_digest` matches only that exact
/// request; otherwise it matches when every `contains` substring occurs in
/// the user prompt.
struct Fixture {
    std::optional<std::string> request_digest;
    std::vector<std::string> contains;
    std::string response;
};

/// Fixture-table generator with a fallback that echoes the first noun-like
/// token of the prompt's document block.
class Generator : public TextGenerator {
public:
    explicit Generator(std::uint64_t seed = 0, std::vector<Fixture> fixtures = {},
                       std::optional<std::string> default_response = std::nullopt);

    /// Reads {"fixtures": [{"request_digest"|"contains", "response"}], "default": "..."}.
    static std::shared_ptr<Generator> from_file(const std::filesystem::path& path, std::uint64_t seed);

    std::string id() const override;
    std::string generate(const GenerationRequest& req) override;

    void add_fixture(Fixture f);
    void add_exact(const GenerationRequest& req, std::string response);
    void set_default(std::optional<std::string> response);

private:
    std::uint64_t seed_;
    std::vector<Fixture> fixtures_;
    std::optional<std::string> default_;
    std::string fixture_digest_;  // part of id() so fixture edits invalidate cached responses
    mutable std::mutex mu_;
};

}  // namespace labelscout::mock
