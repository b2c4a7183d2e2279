#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "labelscout/eval.hpp"
#include "support.hpp"

namespace fixtures {

using labelscout::CoverageGraph;
using labelscout::EdgeSource;
using labelscout::Prediction;

struct RandomGraph {
    std::vector<std::vector<std::size_t>> adj;
    std::size_t right = 0;
};

inline RandomGraph random_graph(std::mt19937_64& rng, std::size_t max_side) {
    const std::size_t n = rng() % (max_side + 1);
    const std::size_t m = rng() % (max_side + 1);
    const double density = std::uniform_real_distribution<double>(0.05, 0.7)(rng);
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t g = 0; g < n; ++g)
        for (std::size_t p = 0; p < m; ++p)
            if (std::uniform_real_distribution<double>(0, 1)(rng) < density) adj[g].push_back(p);
    return {adj, m};
}

inline CoverageGraph graph_from(const std::vector<std::vector<std::size_t>>& adj, std::size_t m) {
    CoverageGraph g;
    for (std::size_t i = 0; i < adj.size(); ++i) g.gt.push_back("g" + std::to_string(i));
    for (std::size_t j = 0; j < m; ++j) g.pred.push_back("p" + std::to_string(j));
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (auto p : adj[i]) g.edges.push_back({i, p, EdgeSource::threshold, 1.0});
    return g;
}

/// A coverage graph with its hand-enumerated coverage.
struct CoverageCase {
    std::string name;
    CoverageGraph graph;
    double coverage;
};

inline std::vector<CoverageCase> coverage_cases() {
    auto edge = [](std::size_t g, std::size_t p) { return labelscout::CoverageEdge{g, p, EdgeSource::threshold, 1.0}; };
    return {
        {"two predictions, one gold", {{"sports"}, {"football", "soccer"}, {edge(0, 0), edge(0, 1)}, 0, {}}, 1.0},
        {"one prediction, two gold", {{"economics", "finance"}, {"money"}, {edge(0, 0), edge(1, 0)}, 0, {}}, 0.5},
        {"augmenting path", {{"a", "b"}, {"x", "y"}, {edge(0, 0), edge(0, 1), edge(1, 0)}, 0, {}}, 1.0},
        {"three gold, one edge", {{"a", "b", "c"}, {"x", "y"}, {edge(2, 1)}, 0, {}}, 1.0 / 3.0},
        {"no edges", {{"a", "b"}, {"x"}, {}, 0, {}}, 0.0},
        {"no gold", {{}, {"x"}, {}, 0, {}}, 0.0},
    };
}

inline Prediction pred(const std::string& id, std::vector<std::string> names) {
    Prediction p;
    p.doc_id = id;
    p.names = std::move(names);
    return p;
}

struct Expect {
    std::size_t num, den;
};

/// Exact-mode documents d01..d10; d05 has no gold labels and is excluded.
struct ExactCase {
    std::vector<Prediction> preds{
        pred("d01", {"a", "c", "b"}), pred("d02", {"b", "a", "c"}), pred("d03", {"a", "x", "b"}),
        pred("d04", {}),              pred("d05", {"a"}),           pred("d06", {"A  B"}),
        pred("d07", {"a", "a", "b"}), pred("d08", {"c", "d", "e"}), pred("d09", {"c", "b", "a"}),
        pred("d10", {"b"}),
    };
    std::map<std::string, std::vector<std::string>> gold{
        {"d01", {"a", "b"}},      {"d02", {"a"}},   {"d03", {"a", "b", "c", "d"}}, {"d04", {"x"}},
        {"d05", {}},              {"d06", {"a b"}}, {"d07", {"a", "b"}},           {"d08", {"a", "b"}},
        {"d09", {"a", "b", "c"}}, {"d10", {"a", "b"}},
    };
    std::vector<Expect> at1{{1, 1}, {0, 1}, {1, 1}, {0, 1}, {1, 1}, {1, 1}, {0, 1}, {1, 1}, {1, 1}};
    double p1 = 6.0 / 9.0;
    // k > |gold| (d02, d06) and k < |gold| (d03) denominators.
    std::vector<Expect> at3{{2, 2}, {1, 1}, {2, 3}, {0, 1}, {1, 1}, {2, 2}, {0, 2}, {3, 3}, {1, 2}};
    double p3 = 37.0 / 54.0;
};

/// Covered-mode documents c1..c5 with a similarity table and a judge for
/// the [low, high) band.
struct CoveredCase {
    testing::TableSimilarity sim;
    testing::TableJudge judge;
    std::vector<Prediction> preds{
        pred("c1", {"quantum physics", "cooking"}),
        pred("c2", {"finance", "weather"}),
        pred("c3", {"painting", "sculpture"}),
        pred("c4", {"courts"}),
        pred("c5", {"cooking", "weather", "quantum physics"}),
    };
    std::map<std::string, std::vector<std::string>> gold{
        {"c1", {"physics"}},
        {"c2", {"economics", "finance"}},  // finance covers only one of the two
        {"c3", {"art"}},                   // two predictions, one gold label
        {"c4", {"law"}},
        {"c5", {"physics"}},
    };
    std::vector<Expect> at1{{1, 1}, {1, 1}, {1, 1}, {1, 1}, {0, 1}};
    double p1 = 4.0 / 5.0;
    std::vector<Expect> at3{{1, 1}, {1, 2}, {1, 1}, {1, 1}, {1, 1}};
    double p3 = 4.5 / 5.0;
    std::vector<Expect> at1_judge_off{{1, 1}, {1, 1}, {1, 1}, {0, 1}, {0, 1}};

    CoveredCase() {
        sim.set("physics", "quantum physics", 0.8);
        sim.set("economics", "finance", 0.8);
        sim.set("art", "painting", 0.9);
        sim.set("art", "sculpture", 0.9);
        sim.set("law", "courts", 0.6);
        judge.set("law", "courts", labelscout::Verdict::yes);
    }
};

/// Whether per-document numerators and denominators match.
inline bool same_documents(const labelscout::PrecisionReport& r, const std::vector<Expect>& expected) {
    if (r.documents.size() != expected.size()) return false;
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (r.documents[i].numerator != expected[i].num || r.documents[i].denominator != expected[i].den) return false;
    return true;
}

}  // namespace fixtures
