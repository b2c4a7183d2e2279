#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelscout/corpus.hpp"
#include "labelscout/error.hpp"
#include "labelscout/gateway.hpp"
#include "labelscout/prompts.hpp"
#include "labelscout/similarity.hpp"

namespace labelscout {

using LabelId = std::int64_t;

enum class LabelStatus { active, frozen, removed };
enum class Provenance { cluster_synthesis, refine_promotion, human_edit };

std::string_view to_string(LabelStatus s);
std::string_view to_string(Provenance p);
LabelStatus label_status_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);

inline constexpr std::size_t kMaxEvidence = 3;

struct Label {
    LabelId id = 0;
    std::string name;  // normalized
    LabelStatus status = LabelStatus::active;
    Provenance provenance = Provenance::cluster_synthesis;
    std::uint64_t created_at_version = 0;
    std::vector<std::string> evidence;  // up to 3 exemplar snippets

    bool live() const noexcept { return status != LabelStatus::removed; }
    bool operator==(const Label&) const = default;
};

enum class PairStatus { pending, resolved };
enum class Resolution { keep_both, remove_a, remove_b, rename };

std::string_view to_string(PairStatus s);
std::string_view to_string(Resolution r);
Resolution resolution_from_string(std::string_view s);

struct BorderlinePair {
    std::int64_t id = 0;
    LabelId label_a = 0;
    LabelId label_b = 0;
    double similarity = 0.0;
    PairStatus status = PairStatus::pending;
    std::optional<Resolution> resolution;
    std::optional<std::string> judge_opinion;  // advisory, from an LLM judge

    bool operator==(const BorderlinePair&) const = default;
};

struct Mutation {
    std::uint64_t version = 0;  // version after applying
    std::string op;
    nlohmann::json payload;

    bool operator==(const Mutation&) const = default;
};

/// Versioned label space. Every mutation appends to the log and bumps the
/// version by one; replaying the log from an empty space reproduces the state.
/// Not internally synchronized: callers serialize writers.
class LabelSpace {
public:
    const std::vector<Label>& labels() const noexcept { return labels_; }
    const std::vector<BorderlinePair>& pairs() const noexcept { return pairs_; }
    const std::vector<Mutation>& log() const noexcept { return log_; }
    std::uint64_t version() const noexcept { return version_; }

    const Label& label(LabelId id) const;
    const Label* find(LabelId id) const;
    /// The live (active or frozen) label with this normalized name.
    const Label* find_live(std::string_view name) const;
    const BorderlinePair& pair(std::int64_t id) const;

    /// Active and frozen labels, ascending id.
    std::vector<const Label*> live() const;
    std::vector<LabelId> live_ids() const;
    std::size_t count(LabelStatus s) const;

    /// Adds an active label. The name is normalized; empty names are a
    /// DataError and names held by a live label a CollisionError.
    LabelId add(std::string_view name, Provenance provenance, std::vector<std::string> evidence = {});

    /// Marks a label removed. Frozen or already-removed labels are a StateError.
    void remove(LabelId id);
    void rename(LabelId id, std::string_view new_name);

    /// Freezes active labels. Already-frozen ids are skipped; removed ids are
    /// a StateError. No mutation when nothing changes.
    void freeze(const std::vector<LabelId>& ids);
    void unfreeze_all();

    std::int64_t add_pair(LabelId a, LabelId b, double similarity, std::optional<std::string> judge_opinion = {});
    /// Resolves a pending pair. `rename` needs `rename_target` (a or b) and
    /// `new_name`. Validation happens before any state changes.
    void resolve(std::int64_t pair_id, Resolution resolution, std::optional<LabelId> rename_target = {},
                 std::optional<std::string> new_name = {});

    /// True when a pair over these two labels (either order) already exists.
    bool has_pair(LabelId a, LabelId b) const;

    nlohmann::json to_json() const;
    /// Parses and re-validates by replaying the log. Throws DataError on mismatch.
    static LabelSpace from_json(const nlohmann::json& j);
    static LabelSpace replay(const std::vector<Mutation>& log);

    void save(const std::filesystem::path& path) const;
    static LabelSpace load(const std::filesystem::path& path);

    /// Newline-separated live label names in id order.
    std::string export_names() const;

    bool same_state(const LabelSpace& other) const;

private:
    Label& mutable_label(LabelId id);
    void commit(std::string op, nlohmann::json payload);
    void apply(const std::string& op, const nlohmann::json& payload);
    void ensure_free_name(const std::string& name, std::optional<LabelId> except) const;

    std::vector<Label> labels_;
    std::vector<BorderlinePair> pairs_;
    std::vector<Mutation> log_;
    std::uint64_t version_ = 0;
};

/// Label normalization for synthesized labels: first non-empty line, any
/// "xxx:" lead-in dropped, punctuation stripped, lowercase. Empty when the
/// result is empty or longer than 6 tokens.
std::string normalize_label_response(std::string_view response);

inline constexpr std::size_t kMaxLabelTokens = 6;

struct SynthesisResult {
    std::size_t cluster = 0;
    std::optional<LabelId> label;
    std::string name;
    std::size_t attempts = 0;
    std::string error;  // set when no label was added
};

/// Concatenates the exemplar chunks into one pseudo-document and asks the
/// generator for a label. Retries up to 2 times on an unusable response. A
/// name that already exists is reported, not added.
SynthesisResult synthesize_label(LabelSpace& space, std::size_t cluster, const std::vector<Chunk>& exemplars,
                                 const std::string& objective, ModelGateway& gateway, const PromptSet& prompts);

struct DedupOptions {
    double high_threshold = 0.75;
    double low_threshold = 0.5;
    bool auto_judge = true;
};

struct DedupReport {
    std::vector<LabelId> removed;
    std::vector<std::int64_t> pairs;  // pairs created by this pass
    std::size_t judge_calls = 0;
};

/// Scans live label pairs in ascending (id_a, id_b) order. At or above the
/// high threshold the later-created label is removed. Inside [low, high) the
/// pair is recorded; with a judge, "yes" removes the later label and "no"
/// resolves keep_both, anything else leaves it pending.
DedupReport deduplicate(LabelSpace& space, SimilarityModel& similarity, PairJudge* judge,
                        const DedupOptions& options = {});

}  // namespace labelscout
