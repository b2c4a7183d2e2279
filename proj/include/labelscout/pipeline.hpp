#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelscout/cache.hpp"
#include "labelscout/classifier.hpp"
#include "labelscout/config.hpp"
#include "labelscout/eval.hpp"
#include "labelscout/keyphrase.hpp"
#include "labelscout/labelspace.hpp"
#include "labelscout/prompts.hpp"
#include "labelscout/refine.hpp"
#include "labelscout/similarity.hpp"

namespace labelscout {

/// File names inside a run directory.
namespace artifacts {
inline constexpr const char* config = "config.json";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* keyphrases = "keyphrases.jsonl";
inline constexpr const char* discovery = "discovery.json";
inline constexpr const char* space_discover = "space.discover.json";
inline constexpr const char* space = "space.json";
inline constexpr const char* iterations = "iterations.jsonl";
inline constexpr const char* predictions = "predictions.jsonl";
inline constexpr const char* report = "report.json";
inline constexpr const char* dominance = "dominance.json";
}  // namespace artifacts

struct InitialSpaceReport {
    std::size_t k = 0;
    std::vector<std::size_t> cluster_sizes;
    double log_likelihood = 0.0;
    std::vector<SynthesisResult> synthesis;
    DedupReport dedup;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

/// Embed -> reduce -> GMM -> per-cluster label synthesis -> dedup.
LabelSpace build_initial_space(const KeyphraseSet& keyphrases, const std::vector<Chunk>& chunks,
                               const RunConfig& config, ModelGateway& gateway, const PromptSet& prompts,
                               SimilarityModel& similarity, PairJudge* judge, InitialSpaceReport* report = nullptr);

/// Gold label names for coverage: the configured file, else the sorted union
/// of the corpus gold labels.
std::vector<std::string> gold_space(const RunConfig& config, const Corpus& corpus);

/// Stage runner bound to one run directory. Each stage reads its inputs from
/// the run directory, writes its outputs there and appends a record to the
/// manifest.
class Pipeline {
public:
    explicit Pipeline(RunConfig config, std::ostream* log = nullptr);
    ~Pipeline();

    const RunConfig& config() const noexcept { return config_; }
    ModelGateway& gateway() { return *gateway_; }
    std::filesystem::path path(const char* artifact) const { return config_.run_dir / artifact; }

    Corpus ingest();
    LabelSpace discover();
    std::vector<IterationRecord> refine(std::optional<std::size_t> iterations = {},
                                        std::optional<std::size_t> subset_size = {});
    std::vector<Prediction> classify(const std::filesystem::path& labels = {},
                                     std::optional<std::size_t> max_ranks = {});
    EvaluationReport evaluate(const std::filesystem::path& predictions = {}, const std::filesystem::path& labels = {});
    DominanceReport probe(std::optional<std::size_t> sample = {});
    /// ingest, discover, refine, classify and (with gold labels) evaluate.
    void run();

    /// The space classify/evaluate/serve use by default: the refined one
    /// when present, else the discovered one.
    std::filesystem::path current_space_path() const;
    Corpus load_corpus() const;

private:
    void record_stage(const std::string& name, const std::function<nlohmann::json(std::vector<std::string>&)>& body);
    void note(const std::string& msg) const;
    std::filesystem::path require(const char* artifact, const char* producer) const;

    RunConfig config_;
    std::ostream* log_;
    PromptSet prompts_;
    std::shared_ptr<ResponseCache> cache_;
    std::unique_ptr<ModelGateway> gateway_;
};

/// Writes `content` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace labelscout
