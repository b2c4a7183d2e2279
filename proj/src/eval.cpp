#include "labelscout/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>

#include "labelscout/error.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

std::string_view to_string(EdgeSource s) { return s == EdgeSource::threshold ? "threshold" : "judge"; }

JudgeMode judge_mode_from_string(std::string_view s) {
    if (s == "llm") return JudgeMode::llm;
    if (s == "off") return JudgeMode::off;
    throw ConfigError("unknown judge mode \"" + std::string(s) + "\"");
}

MatchMode match_mode_from_string(std::string_view s) {
    if (s == "exact") return MatchMode::exact;
    if (s == "covered") return MatchMode::covered;
    throw ConfigError("unknown match mode \"" + std::string(s) + "\"");
}

CoverageGraph build_coverage_graph(const std::vector<std::string>& gt, const std::vector<std::string>& pred,
                                   SimilarityModel& similarity, PairJudge* judge, JudgeMode mode,
                                   const CoverageThresholds& thresholds) {
    if (mode == JudgeMode::llm && !judge) throw ConfigError("judge mode llm needs a judge backend");
    CoverageGraph g;
    g.gt = gt;
    g.pred = pred;
    std::vector<std::string> all = gt;
    all.insert(all.end(), pred.begin(), pred.end());
    similarity.prepare(all);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const double sim = similarity.similarity(gt[i], pred[j]);
            if (sim >= thresholds.high) {
                g.edges.push_back({i, j, EdgeSource::threshold, sim});
                continue;
            }
            if (sim < thresholds.low || mode == JudgeMode::off) continue;
            ++g.judge_calls;
            try {
                const Verdict v = judge->judge(gt[i], pred[j]);
                if (v == Verdict::yes) g.edges.push_back({i, j, EdgeSource::judge, sim});
                if (v == Verdict::unparseable)
                    g.warnings.push_back("unparseable judge answer for (" + gt[i] + ", " + pred[j] + ")");
            } catch (const GatewayError& e) {
                g.warnings.push_back("judge failed for (" + gt[i] + ", " + pred[j] + "): " + e.what());
            }
        }
    }
    return g;
}

namespace {

/// Kuhn's augmenting-path matching over left nodes [from, n) with some right
/// nodes blocked.
std::size_t kuhn(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_size, std::size_t from,
                 const std::vector<bool>& blocked) {
    std::vector<std::ptrdiff_t> owner(right_size, -1);
    std::vector<bool> seen;
    std::function<bool(std::size_t)> augment = [&](std::size_t u) {
        for (auto v : adj[u]) {
            if (blocked[v] || seen[v]) continue;
            seen[v] = true;
            if (owner[v] < 0 || augment(static_cast<std::size_t>(owner[v]))) {
                owner[v] = static_cast<std::ptrdiff_t>(u);
                return true;
            }
        }
        return false;
    };
    std::size_t size = 0;
    for (std::size_t u = from; u < adj.size(); ++u) {
        seen.assign(right_size, false);
        if (augment(u)) ++size;
    }
    return size;
}

}  // namespace

std::size_t max_matching_size(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_size) {
    return kuhn(adj, right_size, 0, std::vector<bool>(right_size, false));
}

CoverageReport max_matching(const CoverageGraph& graph) {
    const std::size_t n = graph.gt.size();
    const std::size_t m = graph.pred.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : graph.edges) adj[e.gt].push_back(e.pred);
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }

    CoverageReport r;
    r.judge_calls = graph.judge_calls;
    std::vector<bool> used(m, false);
    std::size_t remaining = kuhn(adj, m, 0, used);
    // Greedy in (gt, pred) order, keeping a choice only if the rest can still
    // reach the maximum.
    for (std::size_t g = 0; g < n; ++g) {
        bool matched = false;
        for (auto p : adj[g]) {
            if (used[p]) continue;
            used[p] = true;
            if (1 + kuhn(adj, m, g + 1, used) == remaining) {
                r.matching.emplace_back(g, p);
                --remaining;
                matched = true;
                break;
            }
            used[p] = false;
        }
        if (!matched) r.unmatched_gt.push_back(g);
    }
    r.coverage = n == 0 ? 0.0 : static_cast<double>(r.matching.size()) / static_cast<double>(n);
    return r;
}

PrecisionReport precision_at_k(const std::vector<Prediction>& predictions,
                               const std::map<std::string, std::vector<std::string>>& gold, std::size_t k,
                               MatchMode mode, const PrecisionContext& context) {
    if (k < 1) throw ConfigError("P@k needs k >= 1");
    if (mode == MatchMode::covered && !context.similarity)
        throw ConfigError("covered P@k needs a similarity backend");
    PrecisionReport r;
    r.k = k;
    r.mode = mode;
    double sum = 0.0;
    for (const auto& p : predictions) {
        auto it = gold.find(p.doc_id);
        if (it == gold.end() || it->second.empty()) {
            r.excluded.push_back(p.doc_id);
            continue;
        }
        std::vector<std::string> gold_norm;
        for (const auto& g : it->second) {
            auto n = text::normalize_phrase(g);
            if (std::find(gold_norm.begin(), gold_norm.end(), n) == gold_norm.end()) gold_norm.push_back(n);
        }
        std::vector<std::string> top;
        for (std::size_t i = 0; i < std::min(k, p.names.size()); ++i) {
            auto n = text::normalize_phrase(p.names[i]);
            if (std::find(top.begin(), top.end(), n) == top.end()) top.push_back(n);
        }

        DocumentPrecision d;
        d.doc_id = p.doc_id;
        d.denominator = std::min(k, gold_norm.size());
        if (mode == MatchMode::exact) {
            for (const auto& t : top) d.numerator += std::count(gold_norm.begin(), gold_norm.end(), t) > 0 ? 1 : 0;
        } else if (!top.empty()) {
            const auto graph = build_coverage_graph(gold_norm, top, *context.similarity, context.judge,
                                                    context.judge_mode, context.thresholds);
            d.numerator = max_matching(graph).matching.size();
        }
        d.numerator = std::min(d.numerator, d.denominator);
        d.value = static_cast<double>(d.numerator) / static_cast<double>(d.denominator);
        sum += d.value;
        r.documents.push_back(std::move(d));
    }
    r.p_at_k = r.documents.empty() ? 0.0 : sum / static_cast<double>(r.documents.size());
    return r;
}

EvaluationReport evaluate_run(const std::vector<std::string>& space_names, const std::vector<Prediction>& predictions,
                              const std::vector<std::string>& gold_space,
                              const std::map<std::string, std::vector<std::string>>& gold_assignments,
                              const std::vector<std::size_t>& ks, MatchMode mode, const PrecisionContext& context,
                              ModelGateway* gateway) {
    if (!context.similarity) throw ConfigError("evaluation needs a similarity backend");
    if (gold_space.empty()) throw ConfigError("gold label space is empty");
    const std::size_t judge_before = context.judge ? context.judge->calls() : 0;
    const auto counters_before = gateway ? gateway->counters() : GatewayCounters{};

    EvaluationReport r;
    r.graph = build_coverage_graph(gold_space, space_names, *context.similarity, context.judge, context.judge_mode,
                                   context.thresholds);
    r.coverage = max_matching(r.graph);
    for (auto k : ks) r.precision.push_back(precision_at_k(predictions, gold_assignments, k, mode, context));
    r.judge_calls = context.judge ? context.judge->calls() - judge_before : 0;
    if (gateway) {
        const auto after = gateway->counters();
        r.cache_hits = after.cache_hits() - counters_before.cache_hits();
        r.backend_calls = after.backend_calls() - counters_before.backend_calls();
    }
    return r;
}

json to_json(const EvaluationReport& r) {
    json matching = json::array();
    for (auto [g, p] : r.coverage.matching) matching.push_back(json{{"gt", r.graph.gt[g]}, {"pred", r.graph.pred[p]}});
    json unmatched = json::array();
    for (auto g : r.coverage.unmatched_gt) unmatched.push_back(r.graph.gt[g]);
    json edges = json::array();
    for (const auto& e : r.graph.edges) {
        edges.push_back(json{{"gt", r.graph.gt[e.gt]},
                             {"pred", r.graph.pred[e.pred]},
                             {"source", to_string(e.source)},
                             {"similarity", e.similarity}});
    }
    json precision = json::array();
    for (const auto& p : r.precision) {
        json docs = json::array();
        for (const auto& d : p.documents) {
            docs.push_back(json{{"doc_id", d.doc_id}, {"numerator", d.numerator}, {"denominator", d.denominator}});
        }
        precision.push_back(json{{"k", p.k},
                                 {"mode", p.mode == MatchMode::exact ? "exact" : "covered"},
                                 {"p_at_k", p.p_at_k},
                                 {"documents", docs},
                                 {"excluded", p.excluded}});
    }
    return json{{"coverage", r.coverage.coverage},
                {"gold_labels", r.graph.gt.size()},
                {"predicted_labels", r.graph.pred.size()},
                {"matching", matching},
                {"unmatched_gold", unmatched},
                {"edges", edges},
                {"precision", precision},
                {"judge_calls", r.judge_calls},
                {"warnings", r.graph.warnings}};
}

std::string format_table(const EvaluationReport& r) {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12s %8.2f  (%zu/%zu gold labels matched)\n", "coverage",
                  100.0 * r.coverage.coverage, r.coverage.matching.size(), r.graph.gt.size());
    out += buf;
    for (const auto& p : r.precision) {
        const std::string name = "P@" + std::to_string(p.k);
        std::snprintf(buf, sizeof buf, "%-12s %8.2f  (%zu docs, %s)\n", name.c_str(), 100.0 * p.p_at_k,
                      p.documents.size(), p.mode == MatchMode::exact ? "exact" : "covered");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-12s %8zu\n", "judge calls", r.judge_calls);
    out += buf;
    return out;
}

}  // namespace labelscout
