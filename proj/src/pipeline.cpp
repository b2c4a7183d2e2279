#include "labelscout/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "labelscout/cluster.hpp"
#include "labelscout/digest.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json counters_json(const GatewayCounters& c) {
    auto one = [](const CapabilityCounters& x) {
        return json{{"backend_calls", x.backend_calls}, {"cache_hits", x.cache_hits}};
    };
    return json{{"generate", one(c.generate)}, {"embed", one(c.embed)}, {"entail", one(c.entail)}};
}

GatewayCounters diff(const GatewayCounters& after, const GatewayCounters& before) {
    GatewayCounters d;
    auto sub = [](CapabilityCounters& out, const CapabilityCounters& a, const CapabilityCounters& b) {
        out.backend_calls = a.backend_calls - b.backend_calls;
        out.cache_hits = a.cache_hits - b.cache_hits;
    };
    sub(d.generate, after.generate, before.generate);
    sub(d.embed, after.embed, before.embed);
    sub(d.entail, after.entail, before.entail);
    return d;
}

std::unique_ptr<PairJudge> make_judge(ModelGateway& gateway, const PromptSet& prompts, bool matching) {
    return std::make_unique<LlmJudge>(matching ? LlmJudge::for_matching(gateway, prompts)
                                               : LlmJudge::for_dedup(gateway, prompts));
}

std::vector<const Document*> docs_for(const Corpus& corpus, const std::vector<std::string>& ids) {
    std::vector<const Document*> out;
    for (const auto& id : ids) out.push_back(&corpus.at(id));
    return out;
}

std::vector<std::string> live_names(const LabelSpace& space) {
    std::vector<std::string> out;
    for (const auto* l : space.live()) out.push_back(l->name);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

json InitialSpaceReport::to_json() const {
    json synth = json::array();
    for (const auto& s : synthesis) {
        json j{{"cluster", s.cluster}, {"name", s.name}, {"attempts", s.attempts}};
        j["label"] = s.label ? json(*s.label) : json(nullptr);
        if (!s.error.empty()) j["error"] = s.error;
        synth.push_back(std::move(j));
    }
    return json{{"k", k},
                {"cluster_sizes", cluster_sizes},
                {"log_likelihood", log_likelihood},
                {"synthesis", synth},
                {"dedup", {{"removed", dedup.removed}, {"pairs", dedup.pairs}, {"judge_calls", dedup.judge_calls}}},
                {"warnings", warnings}};
}

LabelSpace build_initial_space(const KeyphraseSet& keyphrases, const std::vector<Chunk>& chunks,
                               const RunConfig& config, ModelGateway& gateway, const PromptSet& prompts,
                               SimilarityModel& similarity, PairJudge* judge, InitialSpaceReport* report) {
    if (keyphrases.empty()) throw DataError("no keyphrases to cluster");
    InitialSpaceReport local;
    const auto& entries = keyphrases.entries();
    const std::size_t n = entries.size();
    const std::size_t unique = keyphrases.unique_texts().size();

    std::map<ChunkRef, const Chunk*> by_ref;
    for (const auto& c : chunks) by_ref[ChunkRef{c.doc_id, c.index}] = &c;

    // Cluster membership lists of keyphrase entry rows, nearest-first.
    std::vector<std::vector<std::size_t>> clusters;
    if (unique < 2) {
        local.warnings.push_back("fewer than two distinct keyphrases; using a single cluster");
        clusters.emplace_back();
        for (std::size_t i = 0; i < n; ++i) clusters.back().push_back(i);
        local.k = 1;
    } else {
        std::vector<std::string> texts;
        texts.reserve(n);
        for (const auto& e : entries) texts.push_back(e.text);
        const EmbeddingMatrix x = to_matrix(gateway.embed(texts, Role::embedder));

        std::size_t k = choose_k(config.discovery.k_hint, unique);
        if (k > unique) {
            local.warnings.push_back("cluster count " + std::to_string(k) + " reduced to " + std::to_string(unique) +
                                     " distinct keyphrases");
            k = unique;
        }
        const std::size_t target = std::min({config.discovery.target_dim, static_cast<std::size_t>(x.cols()), n});
        const ReducedMatrix z = reduce(x, target, config.discovery.reducer, config.discovery.external_reduction);

        GmmOptions gmm;
        gmm.components = k;
        gmm.seed = config.seed;
        gmm.max_iter = config.discovery.gmm_max_iter;
        gmm.tol = config.discovery.gmm_tol;
        gmm.restarts = config.discovery.gmm_restarts;
        const MixtureModel model = fit_gmm(z.values, gmm);
        const ClusterAssignment assignment = assign(model, z.values);
        local.k = k;
        local.log_likelihood = model.log_likelihood;
        for (std::size_t c = 0; c < k; ++c) {
            if (assignment.members[c].empty()) {
                clusters.emplace_back();
                continue;
            }
            clusters.push_back(nearest_members(assignment, model, z.values, c, assignment.members[c].size()));
        }
    }

    LabelSpace space;
    const std::string objective = ObjectiveDescription{config.objective, config.demonstrations}.render();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        local.cluster_sizes.push_back(clusters[c].size());
        if (clusters[c].empty()) {
            local.warnings.push_back("cluster " + std::to_string(c) + " is empty");
            continue;
        }
        std::vector<Chunk> exemplars;
        std::set<ChunkRef> taken;
        for (auto row : clusters[c]) {
            if (exemplars.size() >= config.discovery.exemplars) break;
            const auto& ref = entries[row].source;
            if (!taken.insert(ref).second) continue;
            auto it = by_ref.find(ref);
            if (it == by_ref.end())
                throw DataError("keyphrase source chunk " + ref.doc_id + "#" + std::to_string(ref.chunk_index) +
                                " is not in the subset");
            exemplars.push_back(*it->second);
        }
        local.synthesis.push_back(synthesize_label(space, c, exemplars, objective, gateway, prompts));
    }
    if (space.live().empty()) throw DataError("label synthesis produced no labels");
    local.dedup = deduplicate(space, similarity, config.dedup.auto_judge ? judge : nullptr, config.dedup);
    if (report) *report = std::move(local);
    return space;
}

std::vector<std::string> gold_space(const RunConfig& config, const Corpus& corpus) {
    std::vector<std::string> out;
    if (!config.evaluate.gold_space.empty()) {
        std::istringstream in(read_file(config.evaluate.gold_space));
        std::string line;
        while (std::getline(in, line)) {
            auto name = text::normalize_phrase(line);
            if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        }
        return out;
    }
    std::set<std::string> names;
    for (const auto& d : corpus.documents()) {
        for (const auto& g : d.gold_labels) names.insert(text::normalize_phrase(g));
    }
    names.erase("");
    return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {
    config_.validate();
    fs::create_directories(config_.run_dir);
    prompts_ = config_.prompts_dir.empty() ? PromptSet::defaults() : PromptSet::load(config_.prompts_dir);
    const fs::path cache_dir = config_.cache_dir.empty() ? config_.run_dir / "cache" : config_.cache_dir;
    cache_ = std::make_shared<ResponseCache>(cache_dir);
    GatewayOptions options;
    options.max_in_flight = config_.max_in_flight;
    options.deterministic = config_.deterministic;
    gateway_ = std::make_unique<ModelGateway>(make_roles(config_), cache_, options);
    write_file_atomic(path(artifacts::config), config_.to_json().dump(2) + "\n");
}

Pipeline::~Pipeline() = default;

void Pipeline::note(const std::string& msg) const {
    if (log_) *log_ << msg << '\n';
}

fs::path Pipeline::require(const char* artifact, const char* producer) const {
    const fs::path p = path(artifact);
    if (!fs::exists(p))
        throw ConfigError("missing " + p.string() + "; run `" + producer + "` first");
    return p;
}

fs::path Pipeline::current_space_path() const {
    if (fs::exists(path(artifacts::space))) return path(artifacts::space);
    if (fs::exists(path(artifacts::space_discover))) return path(artifacts::space_discover);
    throw ConfigError("missing " + path(artifacts::space).string() + " (and " +
                      path(artifacts::space_discover).string() + "); run `discover` first");
}

Corpus Pipeline::load_corpus() const { return labelscout::ingest(config_.corpus); }

void Pipeline::record_stage(const std::string& name,
                            const std::function<json(std::vector<std::string>&)>& body) {
    json manifest;
    const fs::path mpath = path(artifacts::manifest);
    if (fs::exists(mpath)) {
        try {
            manifest = json::parse(read_file(mpath));
        } catch (const json::exception& e) {
            throw DataError(mpath.string() + ": " + e.what());
        }
    } else {
        const std::string snapshot = config_.to_json().dump();
        manifest = json{{"run_id", sha256_hex(snapshot).substr(0, 12)}, {"stages", json::array()}};
    }
    manifest["config"] = config_.to_json();

    json record{{"stage", name}, {"started_at", utc_now()}};
    const auto before = gateway_->counters();
    std::vector<std::string> produced;
    try {
        json detail = body(produced);
        record["status"] = "completed";
        if (!detail.is_null()) record["detail"] = std::move(detail);
    } catch (const std::exception& e) {
        record["status"] = "failed";
        record["error"] = e.what();
        record["finished_at"] = utc_now();
        record["gateway"] = counters_json(diff(gateway_->counters(), before));
        manifest["stages"].push_back(record);
        write_file_atomic(mpath, manifest.dump(2) + "\n");
        throw;
    }
    record["finished_at"] = utc_now();
    record["gateway"] = counters_json(diff(gateway_->counters(), before));
    json files = json::array();
    for (const auto& a : produced) {
        if (!fs::exists(path(a.c_str()))) throw DataError("stage " + name + " did not produce " + a);
        files.push_back(a);
    }
    record["artifacts"] = files;
    manifest["stages"].push_back(record);
    write_file_atomic(mpath, manifest.dump(2) + "\n");
}

Corpus Pipeline::ingest() {
    Corpus corpus;
    record_stage("ingest", [&](std::vector<std::string>& produced) {
        corpus = load_corpus();
        write_jsonl(corpus, path(artifacts::corpus));
        produced.push_back(artifacts::corpus);
        std::size_t chunks = 0;
        for (const auto& d : corpus.documents()) chunks += chunk_document(d, config_.chunk_size).size();
        note("ingested " + std::to_string(corpus.size()) + " documents, " + std::to_string(chunks) + " chunks");
        return json{{"documents", corpus.size()}, {"chunks", chunks}, {"has_gold_labels", corpus.has_gold_labels()}};
    });
    return corpus;
}

LabelSpace Pipeline::discover() {
    LabelSpace result;
    record_stage("discover", [&](std::vector<std::string>& produced) {
        const Corpus corpus = load_corpus();
        const auto& d = config_.discovery;
        const std::size_t max_size = d.max_subset == 0 ? corpus.size() : std::min(d.max_subset, corpus.size());
        std::size_t size = d.initial_subset == 0 ? max_size : std::min(d.initial_subset, max_size);

        EmbeddingSimilarity similarity(*gateway_);
        auto judge = make_judge(*gateway_, prompts_, false);
        const ObjectiveDescription objective{config_.objective, config_.demonstrations};
        KeyphraseOptions kopts;
        kopts.max_in_flight = config_.max_in_flight;

        json rounds = json::array();
        std::set<std::string> previous;
        KeyphraseSet keyphrases;
        CorpusSubset subset;
        InitialSpaceReport report;
        ExtractionReport extraction;
        for (std::size_t round = 0;; ++round) {
            subset = sample_subset(corpus, config_.seed, size);
            const auto chunks = chunk_documents(corpus, subset.ids, config_.chunk_size);
            keyphrases = build_keyphrase_set(chunks, objective, *gateway_, prompts_, &extraction, kopts);
            result = build_initial_space(keyphrases, chunks, config_, *gateway_, prompts_, similarity, judge.get(),
                                         &report);
            std::set<std::string> names;
            for (const auto* l : result.live()) names.insert(l->name);
            std::size_t fresh = 0;
            for (const auto& n : names) fresh += previous.contains(n) ? 0 : 1;
            rounds.push_back(json{{"subset_size", size},
                                  {"keyphrases", keyphrases.total()},
                                  {"extraction_failures", extraction.failures.size()},
                                  {"labels", names.size()},
                                  {"new_labels", fresh}});
            note("discover round " + std::to_string(round + 1) + ": " + std::to_string(size) + " documents, " +
                 std::to_string(names.size()) + " labels (" + std::to_string(fresh) + " new)");
            if (size >= max_size || d.increment == 0 || (round > 0 && fresh == 0)) break;
            previous = std::move(names);
            size = std::min(size + d.increment, max_size);
        }

        keyphrases.write_jsonl(path(artifacts::keyphrases));
        result.save(path(artifacts::space_discover));
        json failures = json::array();
        for (const auto& f : extraction.failures)
            failures.push_back(json{{"doc_id", f.chunk.doc_id}, {"chunk", f.chunk.chunk_index}, {"error", f.error}});
        json detail{{"rounds", rounds},
                    {"subset", subset.ids},
                    {"clustering", report.to_json()},
                    {"extraction_failures", failures},
                    {"labels", live_names(result)}};
        write_file_atomic(path(artifacts::discovery), detail.dump(2) + "\n");
        produced = {artifacts::keyphrases, artifacts::space_discover, artifacts::discovery};
        return json{{"subset_size", subset.ids.size()},
                    {"labels", result.live().size()},
                    {"space_version", result.version()}};
    });
    return result;
}

std::vector<IterationRecord> Pipeline::refine(std::optional<std::size_t> iterations,
                                              std::optional<std::size_t> subset_size) {
    std::vector<IterationRecord> records;
    record_stage("refine", [&](std::vector<std::string>& produced) {
        RefineConfig rc = config_.refine;
        if (iterations) rc.iterations = *iterations;
        if (subset_size) rc.subset_size = *subset_size;
        LabelSpace space = LabelSpace::load(require(artifacts::space_discover, "discover"));
        const KeyphraseSet keyphrases = KeyphraseSet::read_jsonl(require(artifacts::keyphrases, "discover"));
        const json discovery = json::parse(read_file(require(artifacts::discovery, "discover")));
        const Corpus corpus = load_corpus();
        const auto docs = docs_for(corpus, discovery.at("subset").get<std::vector<std::string>>());

        EmbeddingSimilarity similarity(*gateway_);
        CoverageProbe probe;
        std::unique_ptr<PairJudge> judge;
        std::vector<std::string> gold;
        if (corpus.has_gold_labels()) {
            gold = gold_space(config_, corpus);
            if (config_.evaluate.judge_mode == JudgeMode::llm) judge = make_judge(*gateway_, prompts_, true);
            probe = [&](const LabelSpace& s) {
                const auto graph = build_coverage_graph(gold, live_names(s), similarity, judge.get(),
                                                        config_.evaluate.judge_mode, config_.evaluate.thresholds);
                return max_matching(graph).coverage;
            };
        }
        records = run_refinement(docs, keyphrases, space, rc, *gateway_, similarity, config_.classify, probe);
        std::string lines;
        for (const auto& r : records) {
            lines += to_json(r).dump() + "\n";
            note("refine iteration " + std::to_string(r.iteration + 1) + ": +" + std::to_string(r.added.size()) +
                 " -" + std::to_string(r.removed.size()) + " frozen " + std::to_string(r.frozen.size()) +
                 (r.coverage ? ", coverage " + std::to_string(*r.coverage) : std::string()));
        }
        write_file_atomic(path(artifacts::iterations), lines);
        space.save(path(artifacts::space));
        produced = {artifacts::iterations, artifacts::space};
        json recs = json::array();
        for (const auto& r : records) recs.push_back(to_json(r));
        return json{{"iterations", recs}, {"labels", space.live().size()}, {"space_version", space.version()}};
    });
    return records;
}

std::vector<Prediction> Pipeline::classify(const fs::path& labels, std::optional<std::size_t> max_ranks) {
    std::vector<Prediction> predictions;
    record_stage("classify", [&](std::vector<std::string>& produced) {
        const fs::path space_path = labels.empty() ? current_space_path() : labels;
        const LabelSpace space = LabelSpace::load(space_path);
        const Corpus corpus = load_corpus();
        std::optional<KeyphraseSet> keyphrases;
        if (config_.classify_keyphrases && fs::exists(path(artifacts::keyphrases)))
            keyphrases = KeyphraseSet::read_jsonl(path(artifacts::keyphrases));
        ClassifyOptions options = config_.classify;
        if (max_ranks) options.max_ranks = *max_ranks;
        auto result = classify_corpus(corpus, keyphrases ? &*keyphrases : nullptr, space, *gateway_, options);
        predictions = std::move(result.predictions);
        write_predictions(predictions, path(artifacts::predictions));
        produced = {artifacts::predictions};
        note("classified " + std::to_string(predictions.size()) + " documents against " +
             std::to_string(space.live().size()) + " labels");
        return json{{"labels_file", space_path.filename().string()},
                    {"documents", predictions.size()},
                    {"instances", result.instances.size()},
                    {"space_version", space.version()}};
    });
    return predictions;
}

EvaluationReport Pipeline::evaluate(const fs::path& predictions_path, const fs::path& labels) {
    EvaluationReport report;
    record_stage("evaluate", [&](std::vector<std::string>& produced) {
        const fs::path pred_path = predictions_path.empty() ? path(artifacts::predictions) : predictions_path;
        if (!fs::exists(pred_path))
            throw ConfigError("missing predictions file " + pred_path.string() + "; run `classify` first");
        const auto predictions = read_predictions(pred_path);
        const LabelSpace space = LabelSpace::load(labels.empty() ? current_space_path() : labels);
        const Corpus corpus = load_corpus();
        if (!corpus.has_gold_labels() && config_.evaluate.gold_space.empty())
            throw ConfigError("evaluation needs gold labels in the corpus");

        EmbeddingSimilarity similarity(*gateway_);
        std::unique_ptr<PairJudge> judge;
        if (config_.evaluate.judge_mode == JudgeMode::llm) judge = make_judge(*gateway_, prompts_, true);
        PrecisionContext context{&similarity, judge.get(), config_.evaluate.judge_mode, config_.evaluate.thresholds};
        std::map<std::string, std::vector<std::string>> gold;
        for (const auto& d : corpus.documents()) gold[d.id] = d.gold_labels;
        report = evaluate_run(live_names(space), predictions, gold_space(config_, corpus), gold, config_.evaluate.k,
                              config_.evaluate.match_mode, context, gateway_.get());
        write_file_atomic(path(artifacts::report), to_json(report).dump(2) + "\n");
        produced = {artifacts::report};
        return json{{"coverage", report.coverage.coverage},
                    {"judge_calls", report.judge_calls},
                    {"cache_hits", report.cache_hits}};
    });
    return report;
}

DominanceReport Pipeline::probe(std::optional<std::size_t> sample) {
    DominanceReport report;
    record_stage("probe-dominance", [&](std::vector<std::string>& produced) {
        const Corpus corpus = load_corpus();
        report = probe_dominance(corpus.documents(), sample.value_or(config_.probe_sample), config_.seed, *gateway_,
                                 prompts_);
        json j{{"sampled", report.sampled},
               {"dominant", report.dominant},
               {"percent_dominant", report.percent_dominant},
               {"per_label_dominant_counts", report.per_label_dominant_counts}};
        write_file_atomic(path(artifacts::dominance), j.dump(2) + "\n");
        produced = {artifacts::dominance};
        return j;
    });
    return report;
}

void Pipeline::run() {
    const Corpus corpus = ingest();
    discover();
    refine();
    classify();
    if (corpus.has_gold_labels() || !config_.evaluate.gold_space.empty()) {
        evaluate();
    } else {
        note("no gold labels; skipping evaluate");
    }
}

}  // namespace labelscout
