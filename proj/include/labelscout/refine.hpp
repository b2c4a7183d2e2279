#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelscout/classifier.hpp"
#include "labelscout/keyphrase.hpp"
#include "labelscout/labelspace.hpp"
#include "labelscout/similarity.hpp"

namespace labelscout {

struct RefineConfig {
    std::size_t subset_size = 500;         // low-confidence chunks examined per iteration
    std::size_t keyphrase_min_count = 15;  // promotion needs frequency strictly above this
    double longtail_fraction = 0.01;       // gamma candidates occur in fewer than this share of entries
    std::size_t iterations = 3;
    double freeze_fraction = 0.25;
    std::size_t min_support = 1;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// The `subset_size` chunks with the smallest top score, ties by instance id.
/// Returns instance ids. A size beyond the available chunks is clamped and a
/// warning appended.
std::vector<std::size_t> select_low_confidence(const std::vector<InstanceTop>& chunk_tops, std::size_t subset_size,
                                               std::vector<std::string>* warnings = nullptr);

/// Lower median: element (n-1)/2 of the sorted list.
double lower_median(std::vector<double> values);

struct GammaThreshold {
    double value = 0.0;
    std::vector<std::string> candidates;    // ascending text
    std::vector<double> max_similarities;   // aligned with candidates
    std::string digest;                     // SHA-256 over the candidate list and scores

    std::size_t candidate_count() const noexcept { return candidates.size(); }
};

struct GammaUndefinedError : StateError {
    explicit GammaUndefinedError(const std::string& what) : StateError(what) {}
};

/// Candidates are keyphrases occurring in fewer than longtail_fraction x |P|
/// entries. Each gets its highest similarity to a live label name; gamma is
/// the lower median of those.
GammaThreshold compute_gamma(const KeyphraseSet& keyphrases, const LabelSpace& space, SimilarityModel& similarity,
                             double longtail_fraction);

/// Gate values observed when a keyphrase was promoted.
struct Promotion {
    LabelId label = 0;
    std::string text;
    std::size_t frequency = 0;
    std::size_t min_count = 0;
    double max_similarity = 0.0;
    double gamma = 0.0;
};

/// Keyphrases from the given chunks, by descending frequency then text. A
/// keyphrase becomes a label when its frequency exceeds `min_count`, it is
/// not already a live label name, and its similarity to every live label
/// (including earlier promotions) is below gamma.
std::vector<Promotion> promote_keyphrases(const std::vector<ChunkRef>& low_confidence, const KeyphraseSet& keyphrases,
                                          LabelSpace& space, SimilarityModel& similarity, const GammaThreshold& gamma,
                                          std::size_t min_count);

struct PruneReport {
    std::vector<LabelId> removed;
    std::vector<LabelId> frozen;
    std::map<LabelId, std::size_t> support;
    bool aborted = false;
};

/// Support = number of instances whose top label is the label. Live labels
/// absent from `scored_labels` (added after scoring) are exempt. Unfrozen
/// labels with support below `min_support` are removed unless that would
/// empty the space. Then the top floor(freeze_fraction x n) scored labels by
/// support (ties: lower id) are frozen.
PruneReport prune_and_freeze(LabelSpace& space, const std::vector<InstanceTop>& tops,
                             const std::vector<LabelId>& scored_labels, double freeze_fraction,
                             std::size_t min_support);

struct IterationRecord {
    std::size_t iteration = 0;
    std::vector<LabelId> added;
    std::vector<LabelId> removed;
    std::vector<LabelId> frozen;
    std::size_t low_confidence = 0;
    std::optional<GammaThreshold> gamma;
    std::vector<Promotion> promotions;
    std::optional<double> coverage;
    std::uint64_t version = 0;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const IterationRecord& r);

/// Optional per-iteration coverage measurement.
using CoverageProbe = std::function<double(const LabelSpace&)>;

/// classify -> select low-confidence chunks -> gamma -> promote -> prune and
/// freeze, `config.iterations` times, then unfreeze everything. A throwing
/// iteration restores the space to its state before that iteration.
std::vector<IterationRecord> run_refinement(const std::vector<const Document*>& docs, const KeyphraseSet& keyphrases,
                                            LabelSpace& space, const RefineConfig& config, ModelGateway& gateway,
                                            SimilarityModel& similarity, const ClassifyOptions& classify = {},
                                            const CoverageProbe& probe = {});

}  // namespace labelscout
