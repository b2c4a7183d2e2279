#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "labelscout/corpus.hpp"
#include "labelscout/error.hpp"
#include "labelscout/gateway.hpp"
#include "labelscout/keyphrase.hpp"
#include "labelscout/labelspace.hpp"

namespace labelscout {

enum class InstanceKind { chunk, keyphrase };

/// A scored unit: a chunk or a keyphrase, tied to its document.
struct Instance {
    std::string doc_id;
    std::string text;
    InstanceKind kind = InstanceKind::chunk;
    std::size_t chunk_index = 0;  // source chunk for both kinds
};

struct LabelRef {
    LabelId id = 0;
    std::string name;
};

/// Scores, row-major |instances| x |labels|. Instance ids are row indices.
struct EntailmentMatrix {
    std::vector<LabelId> label_ids;
    std::size_t rows = 0;
    std::vector<double> scores;

    std::size_t cols() const noexcept { return label_ids.size(); }
    double at(std::size_t r, std::size_t c) const { return scores[r * cols() + c]; }
};

/// A backend failure part-way through scoring. Rows before `resume_row` are
/// already cached, so rerunning picks up from there without new calls.
struct PartialMatrixError : GatewayError {
    PartialMatrixError(const std::string& what, std::size_t resume_row)
        : GatewayError(what), resume_row(resume_row) {}
    std::size_t resume_row;
};

struct HypothesisTemplates {
    std::string chunk = kDefaultHypothesis;
    std::string keyphrase = kDefaultHypothesis;
};

/// Replaces `{label}` in `tmpl`.
std::string hypothesis_for(const std::string& tmpl, const std::string& label);

EntailmentMatrix score_all(const std::vector<Instance>& instances, const std::vector<LabelRef>& labels,
                           const HypothesisTemplates& templates, ModelGateway& gateway);

struct InstanceTop {
    std::size_t instance = 0;
    std::vector<LabelId> ranking;        // descending score, ties by ascending id
    std::vector<double> ranked_scores;   // aligned with ranking
    LabelId top() const { return ranking.front(); }
    double top_score() const { return ranked_scores.front(); }
};

std::vector<InstanceTop> top_rank(const EntailmentMatrix& matrix);

struct DocumentGroup {
    std::string doc_id;
    std::vector<std::size_t> members;  // instance ids
};

struct Prediction {
    std::string doc_id;
    std::vector<LabelId> labels;
    std::vector<std::string> names;
    std::vector<double> scores;           // mean entailment at the selected position
    std::vector<std::size_t> supports;    // tally at the selected position
};

inline constexpr std::size_t kDefaultMaxRanks = 3;

/// Rank-position tally. For position r = 1, 2, ...: count how often each
/// not-yet-selected label sits at position r across the group's rankings and
/// pick the most frequent (ties: higher mean score at r, then lower id). Stops
/// after `max_ranks` positions or when no candidate has support.
/// `tops` is indexed by instance id.
Prediction aggregate(const DocumentGroup& group, const std::vector<InstanceTop>& tops, std::size_t max_ranks);

struct ClassifyOptions {
    std::size_t chunk_size = kDefaultChunkSize;
    std::size_t max_ranks = kDefaultMaxRanks;
    HypothesisTemplates templates;
};

struct ClassificationResult {
    std::vector<Instance> instances;  // chunks first (document order), then keyphrases
    EntailmentMatrix matrix;
    std::vector<InstanceTop> tops;
    std::vector<Prediction> predictions;  // ascending doc id
};

/// Builds instances for `docs` (chunks plus, when given, their keyphrases),
/// scores them against the live labels and aggregates per document.
ClassificationResult classify_documents(const std::vector<const Document*>& docs, const KeyphraseSet* keyphrases,
                                        const LabelSpace& space, ModelGateway& gateway,
                                        const ClassifyOptions& options = {});

ClassificationResult classify_corpus(const Corpus& corpus, const KeyphraseSet* keyphrases, const LabelSpace& space,
                                     ModelGateway& gateway, const ClassifyOptions& options = {});

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace labelscout
