#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "labelscout/gateway.hpp"
#include "labelscout/prompts.hpp"

namespace labelscout {

/// Semantic similarity between two short texts (label names, keyphrases).
class SimilarityModel {
public:
    virtual ~SimilarityModel() = default;
    virtual double similarity(const std::string& a, const std::string& b) = 0;
    /// Hint that these texts are about to be compared; lets batching backends prefetch.
    virtual void prepare(const std::vector<std::string>&) {}
};

/// Cosine similarity of gateway embeddings. Embeddings are memoized per text.
class EmbeddingSimilarity : public SimilarityModel {
public:
    explicit EmbeddingSimilarity(ModelGateway& gateway, Role role = Role::similarity)
        : gateway_(gateway), role_(role) {}
    double similarity(const std::string& a, const std::string& b) override;
    void prepare(const std::vector<std::string>& texts) override;

private:
    const EmbeddingVector& vector_for(const std::string& text);

    ModelGateway& gateway_;
    Role role_;
    std::mutex mu_;
    std::map<std::string, EmbeddingVector> memo_;
};

enum class Verdict { yes, no, unparseable };

std::string_view to_string(Verdict v);

/// "Yes"/"No" detection: a leading yes/no word wins, otherwise exactly one
/// of the two words must occur anywhere in the response.
Verdict parse_yes_no(std::string_view response);

/// Binary "do these two labels mean the same thing" arbiter.
class PairJudge {
public:
    virtual ~PairJudge() = default;
    virtual Verdict judge(const std::string& a, const std::string& b) = 0;
    virtual std::size_t calls() const = 0;
};

/// Prompts the judge role with a two-slot template.
class LlmJudge : public PairJudge {
public:
    /// `quote` wraps each name in single quotes before substitution.
    LlmJudge(ModelGateway& gateway, PromptTemplate tmpl, std::string slot_a, std::string slot_b, bool quote = false);

    static LlmJudge for_dedup(ModelGateway& gateway, const PromptSet& prompts);
    static LlmJudge for_matching(ModelGateway& gateway, const PromptSet& prompts);

    Verdict judge(const std::string& a, const std::string& b) override;
    std::size_t calls() const override { return calls_; }

private:
    ModelGateway& gateway_;
    PromptTemplate tmpl_;
    std::string slot_a_;
    std::string slot_b_;
    bool quote_;
    std::size_t calls_ = 0;
};

}  // namespace labelscout
