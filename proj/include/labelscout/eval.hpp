#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "labelscout/classifier.hpp"
#include "labelscout/similarity.hpp"

namespace labelscout {

enum class EdgeSource { threshold, judge };
enum class JudgeMode { llm, off };
enum class MatchMode { exact, covered };

std::string_view to_string(EdgeSource s);
JudgeMode judge_mode_from_string(std::string_view s);
MatchMode match_mode_from_string(std::string_view s);

struct CoverageThresholds {
    double high = 0.75;
    double low = 0.5;
};

struct CoverageEdge {
    std::size_t gt = 0;
    std::size_t pred = 0;
    EdgeSource source = EdgeSource::threshold;
    double similarity = 0.0;
};

struct CoverageGraph {
    std::vector<std::string> gt;
    std::vector<std::string> pred;
    std::vector<CoverageEdge> edges;  // ascending (gt, pred)
    std::size_t judge_calls = 0;
    std::vector<std::string> warnings;
};

/// Scores all gt x pred pairs. Similarity >= high is an edge; inside
/// [low, high) the judge decides when `mode` is llm; below low never.
/// A judge failure or unparseable answer leaves the pair without an edge.
CoverageGraph build_coverage_graph(const std::vector<std::string>& gt, const std::vector<std::string>& pred,
                                   SimilarityModel& similarity, PairJudge* judge, JudgeMode mode,
                                   const CoverageThresholds& thresholds = {});

struct CoverageReport {
    double coverage = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> matching;  // (gt, pred), ascending gt
    std::vector<std::size_t> unmatched_gt;
    std::size_t judge_calls = 0;
};

/// Size of a maximum bipartite matching (augmenting paths). `adj[g]` lists
/// the right-side nodes adjacent to left node g.
std::size_t max_matching_size(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_size);

/// Maximum-cardinality matching; among maximum matchings the one whose
/// (gt, pred) list is lexicographically smallest.
CoverageReport max_matching(const CoverageGraph& graph);

struct DocumentPrecision {
    std::string doc_id;
    std::size_t numerator = 0;
    std::size_t denominator = 0;
    double value = 0.0;
};

struct PrecisionReport {
    std::size_t k = 0;
    MatchMode mode = MatchMode::exact;
    double p_at_k = 0.0;
    std::vector<DocumentPrecision> documents;
    std::vector<std::string> excluded;  // docs without gold labels
};

struct PrecisionContext {
    SimilarityModel* similarity = nullptr;  // covered mode only
    PairJudge* judge = nullptr;
    JudgeMode judge_mode = JudgeMode::off;
    CoverageThresholds thresholds;
};

/// Mean over documents of matched(top-k, gold) / min(k, |gold|). Exact mode
/// intersects normalized names; covered mode uses a per-document maximum
/// matching on the coverage graph.
PrecisionReport precision_at_k(const std::vector<Prediction>& predictions,
                               const std::map<std::string, std::vector<std::string>>& gold, std::size_t k,
                               MatchMode mode, const PrecisionContext& context = {});

struct EvaluationReport {
    CoverageGraph graph;
    CoverageReport coverage;
    std::vector<PrecisionReport> precision;
    std::size_t judge_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t backend_calls = 0;
};

EvaluationReport evaluate_run(const std::vector<std::string>& space_names, const std::vector<Prediction>& predictions,
                              const std::vector<std::string>& gold_space,
                              const std::map<std::string, std::vector<std::string>>& gold_assignments,
                              const std::vector<std::size_t>& ks, MatchMode mode, const PrecisionContext& context,
                              ModelGateway* gateway = nullptr);

nlohmann::json to_json(const EvaluationReport& r);
std::string format_table(const EvaluationReport& r);

}  // namespace labelscout
