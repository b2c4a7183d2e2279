// Acceptance runner: one PASS/FAIL/SKIP line per criterion. Exit status is
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "e2e.hpp"
#include "fixtures.hpp"
#include "labelscout/classifier.hpp"
#include "labelscout/cluster.hpp"
#include "labelscout/refine.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace labelscout;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::pass;
    std::string detail;
};

/// Collects the first few failure messages of one criterion.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
    }
    Outcome outcome(const std::string& summary) const {
        if (failures_ == 0) return {Status::pass, summary};
        return {Status::fail, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + messages_};
    }

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
    std::string messages_;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

// --- matching ---------------------------------------------------------------

Outcome matching_oracle() {
    Checker c;
    std::mt19937_64 rng(20240601);
    const auto start = Clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const auto [adj, m] = fixtures::random_graph(rng, 8);
        const std::size_t expected = oracle::brute_force_matching(adj, m);
        c.expect(max_matching_size(adj, m) == expected, "instance " + std::to_string(trial) + " size");
        c.expect(max_matching(fixtures::graph_from(adj, m)).matching.size() == expected,
                 "instance " + std::to_string(trial) + " matching");
    }
    const double t = seconds_since(start);
    c.expect(t < 5.0, "took " + fmt(t) + " s");
    return c.outcome("200 instances equal brute force; " + fmt(t) + " s (limit 5 s)");
}

Outcome coverage_fixtures() {
    Checker c;
    const auto cases = fixtures::coverage_cases();
    for (const auto& k : cases) {
        const double got = max_matching(k.graph).coverage;
        c.expect(got == k.coverage, k.name + ": got " + fmt(got, 6) + ", want " + fmt(k.coverage, 6));
    }
    return c.outcome(std::to_string(cases.size()) + " graphs, exact equality");
}

Outcome precision_fixtures() {
    Checker c;
    const double tol = 1e-12;
    const fixtures::ExactCase e;
    const auto e1 = precision_at_k(e.preds, e.gold, 1, MatchMode::exact);
    const auto e3 = precision_at_k(e.preds, e.gold, 3, MatchMode::exact);
    c.expect(fixtures::same_documents(e1, e.at1), "exact k=1 per-document counts");
    c.expect(fixtures::same_documents(e3, e.at3), "exact k=3 per-document counts");
    c.expect(std::abs(e1.p_at_k - e.p1) <= tol, "exact P@1 " + fmt(e1.p_at_k, 12));
    c.expect(std::abs(e3.p_at_k - e.p3) <= tol, "exact P@3 " + fmt(e3.p_at_k, 12));

    fixtures::CoveredCase v;
    const PrecisionContext ctx{&v.sim, &v.judge, JudgeMode::llm, {}};
    const auto v1 = precision_at_k(v.preds, v.gold, 1, MatchMode::covered, ctx);
    const auto v3 = precision_at_k(v.preds, v.gold, 3, MatchMode::covered, ctx);
    c.expect(fixtures::same_documents(v1, v.at1), "covered k=1 per-document counts");
    c.expect(fixtures::same_documents(v3, v.at3), "covered k=3 per-document counts");
    c.expect(std::abs(v1.p_at_k - v.p1) <= tol, "covered P@1 " + fmt(v1.p_at_k, 12));
    c.expect(std::abs(v3.p_at_k - v.p3) <= tol, "covered P@3 " + fmt(v3.p_at_k, 12));
    const std::size_t docs = e1.documents.size() + e1.excluded.size() + v1.documents.size();
    c.expect(docs >= 10, "only " + std::to_string(docs) + " documents");
    return c.outcome(std::to_string(docs) + " documents; counts exact; P@k within 1e-12");
}

// --- clustering -------------------------------------------------------------

Outcome gmm() {
    Checker c;
    const auto start = Clock::now();
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> normal;
    const int n = 200;
    Eigen::MatrixXd z(n, 2);
    std::vector<std::size_t> truth;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = i < n / 2 ? 0 : 1;
        truth.push_back(k);
        z(i, 0) = normal(rng) + (k ? 10.0 : 0.0);
        z(i, 1) = normal(rng);
    }
    GmmOptions opt;
    opt.components = 2;
    opt.seed = 5;
    const auto model = fit_gmm(z, opt);
    const double ari = oracle::adjusted_rand_index(assign(model, z).labels, truth);
    const double t = seconds_since(start);
    c.expect(ari == 1.0, "ARI " + fmt(ari, 6));
    c.expect(t < 1.0, "took " + fmt(t) + " s");

    std::vector<const MixtureModel*> fits{&model};
    std::vector<MixtureModel> more;
    std::mt19937_64 rng2(8);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::MatrixXd x(60 + trial, 3);
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < 3; ++j) x(i, j) = normal(rng2) * (1.0 + j);
        GmmOptions o;
        o.components = 2 + trial % 4;
        o.seed = trial;
        o.restarts = 2;
        more.push_back(fit_gmm(x, o));
    }
    for (const auto& m : more) fits.push_back(&m);
    std::size_t steps = 0;
    for (const auto* m : fits) {
        const auto& h = m->log_likelihood_history;
        for (std::size_t i = 1; i < h.size(); ++i, ++steps)
            c.expect(h[i] >= h[i - 1] - 1e-9, "log-likelihood dropped by " + fmt(h[i - 1] - h[i], 12));
    }
    return c.outcome("ARI " + fmt(ari, 1) + " in " + fmt(t) + " s (limit 1 s); " + std::to_string(steps) +
                     " EM steps over " + std::to_string(fits.size()) + " fits non-decreasing (slack 1e-9)");
}

Outcome pca() {
    Checker c;
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd x(50, 8);
        oracle::Matrix rows(50, std::vector<double>(8));
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 8; ++j) rows[i][j] = x(i, j) = normal(rng) * (1.0 + j) + 0.3 * normal(rng);
        for (std::size_t r : {2u, 5u, 8u}) {
            const auto got = reduce_pca(x, r).values;
            const auto want = oracle::pca_projection(rows, r);
            for (int col = 0; col < got.cols(); ++col) {
                double dotp = 0.0;
                for (int i = 0; i < 50; ++i) dotp += got(i, col) * want[i][col];
                const double sign = dotp < 0 ? -1.0 : 1.0;
                for (int i = 0; i < 50; ++i) worst = std::max(worst, std::abs(got(i, col) - sign * want[i][col]));
            }
        }
    }
    c.expect(worst < 1e-6, "max deviation " + sci(worst));
    return c.outcome("60 projections, max deviation " + sci(worst) + " (limit 1e-6)");
}

// --- end to end -------------------------------------------------------------

/// Planted-truth coverage of a space: edges where similarity >= the high
/// threshold, maximum matching by exhaustive search.
double planted_coverage(const std::vector<std::string>& planted, const LabelSpace& space, ModelGateway& gw) {
    EmbeddingSimilarity sim(gw);
    std::vector<std::string> names;
    for (const auto* l : space.live()) names.push_back(l->name);
    std::vector<std::vector<std::size_t>> adj(planted.size());
    for (std::size_t g = 0; g < planted.size(); ++g)
        for (std::size_t p = 0; p < names.size(); ++p)
            if (sim.similarity(planted[g], names[p]) >= CoverageThresholds{}.high) adj[g].push_back(p);
    return static_cast<double>(oracle::brute_force_matching(adj, names.size())) / static_cast<double>(planted.size());
}

struct E2eState {
    testing::TempDir a, b;
    bool ran = false;
    std::string error;
};

E2eState& e2e_state() {
    static E2eState s;
    return s;
}

Outcome synthetic_end_to_end() {
    Checker c;
    auto& st = e2e_state();
    const auto start = Clock::now();
    const auto sa = e2e::write_synthetic(st.a.path());
    e2e::write_synthetic(st.b.path());
    const auto planted = sa.corpus.planted();
    c.expect(planted.size() == 12 && sa.corpus.head.size() == 9 && sa.corpus.longtail.size() == 3,
             "planted label counts");

    for (const fs::path& dir : {st.a.path(), st.b.path()}) {
        const std::string cfg = "-q -c '" + (dir / "config.json").string() + "'";
        for (const char* stage : {"ingest", "discover", "refine", "classify", "evaluate"}) {
            const auto r = e2e::run_cli(LABELSCOUT_CLI, std::string(stage) + " " + cfg, dir);
            c.expect(r.status == 0, std::string(stage) + " exited " + std::to_string(r.status) + ": " + r.output);
        }
    }
    const double t = seconds_since(start);
    st.ran = true;

    // Each long-tail label is gold for under 1% of documents.
    const Corpus written = ingest(st.a / "corpus.jsonl");
    for (const auto& l : sa.corpus.longtail) {
        std::size_t docs = 0;
        for (const auto& d : written.documents())
            docs += std::count(d.gold_labels.begin(), d.gold_labels.end(), l) > 0 ? 1 : 0;
        c.expect(docs > 0 && static_cast<double>(docs) < 0.01 * static_cast<double>(written.size()),
                 l + " is gold for " + std::to_string(docs) + " documents");
    }

    Pipeline p(RunConfig::load(sa.config));
    const double discovered = planted_coverage(planted, LabelSpace::load(st.a / "run" / "space.discover.json"), p.gateway());
    const double refined = planted_coverage(planted, LabelSpace::load(st.a / "run" / "space.json"), p.gateway());
    c.expect(discovered >= 9.0 / 12.0, "discover coverage " + fmt(discovered * 12, 0) + "/12");
    c.expect(refined == 1.0, "refine coverage " + fmt(refined * 12, 0) + "/12");

    std::ifstream in(st.a / "run" / "iterations.jsonl");
    std::vector<double> per_iteration;
    for (std::string line; std::getline(in, line);) {
        const auto j = json::parse(line);
        per_iteration.push_back(j.at("coverage").is_null() ? -1.0 : j.at("coverage").get<double>());
    }
    c.expect(!per_iteration.empty() && per_iteration.size() <= 5, std::to_string(per_iteration.size()) + " iterations");
    for (std::size_t i = 0; i < per_iteration.size(); ++i) {
        c.expect(per_iteration[i] >= 0.0, "iteration " + std::to_string(i) + " has no coverage");
        if (i > 0) c.expect(per_iteration[i] >= per_iteration[i - 1], "coverage decreased at iteration " + std::to_string(i));
    }

    const auto diff = e2e::differing(st.a / "run", st.b / "run");
    std::string names;
    for (const auto& d : diff) names += d + " ";
    c.expect(diff.empty(), "cold runs differ in " + names);
    c.expect(t < 60.0, "two runs took " + fmt(t, 1) + " s");

    std::string trace;
    for (double v : per_iteration) trace += (trace.empty() ? "" : ",") + fmt(v * 12, 0);
    return c.outcome("discover " + fmt(discovered * 12, 0) + "/12, refine " + fmt(refined * 12, 0) +
                     "/12, per-iteration [" + trace + "], two cold runs identical, " + fmt(t, 1) + " s (limit 60 s)");
}

// --- refinement -------------------------------------------------------------

Outcome refinement_gates() {
    Checker c;
    std::size_t promotions = 0;

    // Promotions recorded by the synthetic run, checked against an
    // independent recount of the keyphrase file.
    auto& st = e2e_state();
    if (st.ran) {
        const auto kp = KeyphraseSet::read_jsonl(st.a / "run" / "keyphrases.jsonl");
        std::map<std::string, std::size_t> counts;
        for (const auto& e : kp.entries()) ++counts[e.text];
        std::ifstream in(st.a / "run" / "iterations.jsonl");
        for (std::string line; std::getline(in, line);) {
            const auto j = json::parse(line);
            if (j.at("gamma").is_null()) continue;
            auto sims = j.at("gamma").at("max_similarities").get<std::vector<double>>();
            std::sort(sims.begin(), sims.end());
            const double median = sims.empty() ? NAN : sims[(sims.size() - 1) / 2];
            c.expect(j.at("gamma").at("value").get<double>() == median, "gamma is not the lower median");
            for (const auto& p : j.at("promotions")) {
                ++promotions;
                const std::string text = p.at("text");
                c.expect(counts[text] > 15, text + " frequency " + std::to_string(counts[text]));
                c.expect(p.at("frequency").get<std::size_t>() == counts[text], text + " recorded frequency");
                c.expect(p.at("max_similarity").get<double>() < p.at("gamma").get<double>(), text + " similarity gate");
                c.expect(p.at("gamma").get<double>() == median, text + " gamma snapshot");
            }
        }
        c.expect(promotions > 0, "synthetic run promoted nothing");
    } else {
        c.expect(false, "synthetic run unavailable");
    }

    // Randomized promotion trials.
    std::mt19937_64 rng(99);
    std::size_t random_promotions = 0;
    for (int trial = 0; trial < 200; ++trial) {
        KeyphraseSet k;
        std::size_t chunk = 0;
        std::vector<std::string> names;
        for (int i = 0; i < 12; ++i) {
            const std::string text = "kp" + std::to_string(i);
            names.push_back(text);
            for (std::size_t n = 1 + rng() % 30; n > 0; --n) k.add({text, {"doc", chunk++}, Granularity::unspecified});
        }
        LabelSpace space;
        for (int i = 0; i < 3; ++i) {
            space.add("label" + std::to_string(i), Provenance::cluster_synthesis);
            names.push_back("label" + std::to_string(i));
        }
        testing::TableSimilarity sim;
        std::uniform_real_distribution<double> u(0.0, 0.8);
        for (std::size_t x = 0; x < names.size(); ++x)
            for (std::size_t y = x + 1; y < names.size(); ++y) sim.set(names[x], names[y], u(rng));
        GammaThreshold gamma;
        gamma.value = u(rng);
        std::vector<ChunkRef> refs;
        for (const auto& e : k.entries()) refs.push_back(e.source);
        std::vector<std::string> live{"label0", "label1", "label2"};
        for (const auto& p : promote_keyphrases(refs, k, space, sim, gamma, 15)) {
            ++random_promotions;
            c.expect(p.frequency > 15 && p.frequency == k.frequency(p.text), "random trial frequency gate");
            double m = -1.0;
            for (const auto& n : live) m = std::max(m, sim.similarity(p.text, n));
            c.expect(p.max_similarity == m && m < gamma.value, "random trial similarity gate");
            live.push_back(p.text);
        }
    }

    // Frozen labels survive 1,000 randomized traces.
    std::mt19937_64 trace_rng(2024);
    std::size_t removals = 0;
    for (int trace = 0; trace < 1000; ++trace) {
        LabelSpace space;
        for (std::size_t i = 0, n = 1 + trace_rng() % 8; i < n; ++i)
            space.add("l" + std::to_string(i), Provenance::cluster_synthesis);
        std::set<LabelId> frozen;
        for (std::size_t it = 0, iters = 1 + trace_rng() % 5; it < iters; ++it) {
            const auto scored = space.live_ids();
            if (trace_rng() % 3 == 0)
                space.add("new" + std::to_string(it), Provenance::refine_promotion);
            std::vector<InstanceTop> tops;
            for (std::size_t i = 0, n = trace_rng() % 12; i < n; ++i)
                tops.push_back({i, {scored[trace_rng() % scored.size()]}, {0.5}});
            const auto r = prune_and_freeze(space, tops, scored, static_cast<double>(trace_rng() % 5) / 4.0,
                                            trace_rng() % 3);
            removals += r.removed.size();
            for (auto id : r.removed) c.expect(frozen.count(id) == 0, "frozen label removed in trace " + std::to_string(trace));
            frozen.insert(r.frozen.begin(), r.frozen.end());
        }
    }
    return c.outcome(std::to_string(promotions) + " run promotions and " + std::to_string(random_promotions) +
                     " randomized promotions pass both gates; 1000 traces (" + std::to_string(removals) +
                     " removals) never removed a frozen label");
}

// --- cache ------------------------------------------------------------------

Outcome cache_determinism() {
    Checker c;
    auto& st = e2e_state();
    if (!st.ran) return {Status::fail, "synthetic run unavailable"};
    const fs::path run = st.a / "run";
    const RunConfig cfg = RunConfig::load(st.a / "config.json");
    {
        Pipeline cold(cfg);
        cold.probe();  // the one stage the synthetic run did not execute
    }
    std::vector<std::string> names = e2e::kStableArtifacts;
    names.push_back("dominance.json");
    std::map<std::string, std::string> before;
    for (const auto& n : names) before[n] = e2e::slurp(run / n);

    const std::vector<std::pair<std::string, std::function<void(Pipeline&)>>> stages{
        {"ingest", [](Pipeline& p) { p.ingest(); }},     {"discover", [](Pipeline& p) { p.discover(); }},
        {"refine", [](Pipeline& p) { p.refine(); }},     {"classify", [](Pipeline& p) { p.classify(); }},
        {"evaluate", [](Pipeline& p) { p.evaluate(); }}, {"probe-dominance", [](Pipeline& p) { p.probe(); }},
    };
    std::size_t hits = 0;
    for (const auto& [name, fn] : stages) {
        Pipeline warm(cfg);
        fn(warm);
        const auto counters = warm.gateway().counters();
        hits += counters.cache_hits();
        c.expect(counters.backend_calls() == 0,
                 name + " issued " + std::to_string(counters.backend_calls()) + " backend calls");
    }
    for (const auto& n : names) c.expect(e2e::slurp(run / n) == before[n], n + " changed on warm rerun");
    return c.outcome("6 stages rerun warm: 0 backend calls, " + std::to_string(hits) + " cache hits, " +
                     std::to_string(names.size()) + " artifacts byte-identical");
}

// --- aggregation ------------------------------------------------------------

Outcome aggregation() {
    Checker c;
    std::mt19937_64 rng(123);
    const double levels[] = {0.2, 0.4, 0.5, 0.7, 0.9};
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t members = 1 + rng() % 12, labels = 1 + rng() % 6, max_ranks = 1 + rng() % 4;
        std::vector<InstanceTop> tops;
        std::vector<std::vector<std::int64_t>> rankings;
        std::vector<std::vector<double>> scores;
        DocumentGroup group{"doc", {}};
        for (std::size_t i = 0; i < members; ++i) {
            InstanceTop t;
            t.instance = i;
            for (std::size_t l = 0; l < labels; ++l) t.ranking.push_back(static_cast<LabelId>(l + 1));
            std::shuffle(t.ranking.begin(), t.ranking.end(), rng);
            for (std::size_t l = 0; l < labels; ++l) t.ranked_scores.push_back(levels[rng() % 5]);
            std::sort(t.ranked_scores.rbegin(), t.ranked_scores.rend());
            rankings.push_back(t.ranking);
            scores.push_back(t.ranked_scores);
            tops.push_back(std::move(t));
            group.members.push_back(i);
        }
        const auto want = oracle::tally(rankings, scores, max_ranks);
        const auto got = aggregate(group, tops, max_ranks);
        bool same = got.labels.size() == want.size();
        for (std::size_t i = 0; same && i < want.size(); ++i)
            same = got.labels[i] == want[i].label && got.supports[i] == want[i].support && got.scores[i] == want[i].mean;
        c.expect(same, "group " + std::to_string(trial) + " differs from the tally");
        for (int perm = 0; perm < 5; ++perm) {
            DocumentGroup shuffled = group;
            std::shuffle(shuffled.members.begin(), shuffled.members.end(), rng);
            const auto again = aggregate(shuffled, tops, max_ranks);
            c.expect(again.labels == got.labels && again.supports == got.supports && again.scores == got.scores,
                     "group " + std::to_string(trial) + " depends on instance order");
        }
    }
    return c.outcome("100 groups equal the brute-force tally; 500 permutations invariant");
}

// --- live -------------------------------------------------------------------

Outcome live_smoke() {
    const char* path = std::getenv("LABELSCOUT_LIVE_CONFIG");
    if (!path || !*path) return {Status::skip, "LABELSCOUT_LIVE_CONFIG not set"};
    Checker c;
    testing::TempDir dir;
    auto j = json::parse(e2e::slurp(path));
    const fs::path base = fs::absolute(fs::path(path)).parent_path();
    RunConfig original = RunConfig::from_json(j, base);
    const Corpus full = ingest(original.corpus);
    std::vector<Document> docs(full.documents().begin(),
                               full.documents().begin() + static_cast<long>(std::min<std::size_t>(50, full.size())));
    c.expect(docs.size() == 50, "corpus has only " + std::to_string(docs.size()) + " documents");
    write_jsonl(Corpus(docs), dir / "corpus.jsonl");
    j["corpus"] = (dir / "corpus.jsonl").string();
    j["run_dir"] = (dir / "run").string();
    j.erase("cache_dir");
    Pipeline p(RunConfig::from_json(j, base));
    p.ingest();
    const auto space = p.discover();
    const auto predictions = p.classify();
    c.expect(space.live().size() >= 3, "only " + std::to_string(space.live().size()) + " labels");
    c.expect(predictions.size() == docs.size(), "missing predictions");
    return c.outcome(std::to_string(space.live().size()) + " labels, " + std::to_string(predictions.size()) +
                     " documents classified");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"matching-oracle", matching_oracle},
        {"coverage-fixtures", coverage_fixtures},
        {"precision-at-k-fixtures", precision_fixtures},
        {"gmm-planted-gaussians", gmm},
        {"pca-vs-jacobi", pca},
        {"synthetic-end-to-end", synthetic_end_to_end},
        {"refinement-gates", refinement_gates},
        {"cache-determinism", cache_determinism},
        {"aggregation-oracle", aggregation},
        {"live-smoke", live_smoke},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("threw: ") + e.what()};
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        if (o.status == Status::fail) ++failed;
        std::printf("%s %-24s %s\n", tag, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
