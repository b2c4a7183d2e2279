#include "labelscout/labelspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

std::string_view to_string(LabelStatus s) {
    switch (s) {
        case LabelStatus::active: return "active";
        case LabelStatus::frozen: return "frozen";
        case LabelStatus::removed: return "removed";
    }
    return "active";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::cluster_synthesis: return "cluster-synthesis";
        case Provenance::refine_promotion: return "refine-promotion";
        case Provenance::human_edit: return "human-edit";
    }
    return "cluster-synthesis";
}

LabelStatus label_status_from_string(std::string_view s) {
    if (s == "active") return LabelStatus::active;
    if (s == "frozen") return LabelStatus::frozen;
    if (s == "removed") return LabelStatus::removed;
    throw DataError("unknown label status \"" + std::string(s) + "\"");
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "cluster-synthesis") return Provenance::cluster_synthesis;
    if (s == "refine-promotion") return Provenance::refine_promotion;
    if (s == "human-edit") return Provenance::human_edit;
    throw DataError("unknown provenance \"" + std::string(s) + "\"");
}

std::string_view to_string(PairStatus s) { return s == PairStatus::pending ? "pending" : "resolved"; }

std::string_view to_string(Resolution r) {
    switch (r) {
        case Resolution::keep_both: return "keep_both";
        case Resolution::remove_a: return "remove_a";
        case Resolution::remove_b: return "remove_b";
        case Resolution::rename: return "rename";
    }
    return "keep_both";
}

Resolution resolution_from_string(std::string_view s) {
    if (s == "keep_both") return Resolution::keep_both;
    if (s == "remove_a") return Resolution::remove_a;
    if (s == "remove_b") return Resolution::remove_b;
    if (s == "rename") return Resolution::rename;
    throw ConfigError("unknown resolution \"" + std::string(s) + "\"");
}

// ---------------------------------------------------------------------------

const Label* LabelSpace::find(LabelId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) return nullptr;
    return &labels_[static_cast<std::size_t>(id)];
}

const Label& LabelSpace::label(LabelId id) const {
    const Label* l = find(id);
    if (!l) throw StateError("no label with id " + std::to_string(id));
    return *l;
}

Label& LabelSpace::mutable_label(LabelId id) { return const_cast<Label&>(label(id)); }

const Label* LabelSpace::find_live(std::string_view name) const {
    const std::string norm = text::normalize_phrase(name);
    for (const auto& l : labels_) {
        if (l.live() && l.name == norm) return &l;
    }
    return nullptr;
}

const BorderlinePair& LabelSpace::pair(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= pairs_.size())
        throw StateError("no borderline pair with id " + std::to_string(id));
    return pairs_[static_cast<std::size_t>(id)];
}

std::vector<const Label*> LabelSpace::live() const {
    std::vector<const Label*> out;
    for (const auto& l : labels_) {
        if (l.live()) out.push_back(&l);
    }
    return out;
}

std::vector<LabelId> LabelSpace::live_ids() const {
    std::vector<LabelId> out;
    for (const auto& l : labels_) {
        if (l.live()) out.push_back(l.id);
    }
    return out;
}

std::size_t LabelSpace::count(LabelStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(labels_.begin(), labels_.end(), [s](const Label& l) { return l.status == s; }));
}

bool LabelSpace::has_pair(LabelId a, LabelId b) const {
    return std::any_of(pairs_.begin(), pairs_.end(), [&](const BorderlinePair& p) {
        return (p.label_a == a && p.label_b == b) || (p.label_a == b && p.label_b == a);
    });
}

void LabelSpace::ensure_free_name(const std::string& name, std::optional<LabelId> except) const {
    if (name.empty()) throw DataError("label name is empty after normalization");
    const Label* clash = find_live(name);
    if (clash && (!except || clash->id != *except)) throw CollisionError(name);
}

void LabelSpace::commit(std::string op, json payload) {
    ++version_;
    apply(op, payload);
    log_.push_back({version_, std::move(op), std::move(payload)});
}

void LabelSpace::apply(const std::string& op, const json& p) {
    if (op == "add") {
        Label l;
        l.id = p.at("id").get<LabelId>();
        l.name = p.at("name").get<std::string>();
        l.provenance = provenance_from_string(p.at("provenance").get<std::string>());
        l.evidence = p.value("evidence", std::vector<std::string>{});
        l.created_at_version = version_;
        if (l.id != static_cast<LabelId>(labels_.size())) throw DataError("label ids out of sequence in log");
        labels_.push_back(std::move(l));
    } else if (op == "remove") {
        mutable_label(p.at("id").get<LabelId>()).status = LabelStatus::removed;
    } else if (op == "rename") {
        mutable_label(p.at("id").get<LabelId>()).name = p.at("name").get<std::string>();
    } else if (op == "freeze" || op == "unfreeze") {
        const auto to = op == "freeze" ? LabelStatus::frozen : LabelStatus::active;
        for (auto id : p.at("ids").get<std::vector<LabelId>>()) mutable_label(id).status = to;
    } else if (op == "pair_add") {
        BorderlinePair bp;
        bp.id = p.at("id").get<std::int64_t>();
        bp.label_a = p.at("a").get<LabelId>();
        bp.label_b = p.at("b").get<LabelId>();
        bp.similarity = p.at("similarity").get<double>();
        if (p.contains("judge_opinion")) bp.judge_opinion = p.at("judge_opinion").get<std::string>();
        if (bp.id != static_cast<std::int64_t>(pairs_.size())) throw DataError("pair ids out of sequence in log");
        pairs_.push_back(std::move(bp));
    } else if (op == "pair_resolve") {
        auto& bp = pairs_.at(p.at("id").get<std::size_t>());
        const auto r = resolution_from_string(p.at("resolution").get<std::string>());
        bp.status = PairStatus::resolved;
        bp.resolution = r;
        if (r == Resolution::remove_a) mutable_label(bp.label_a).status = LabelStatus::removed;
        if (r == Resolution::remove_b) mutable_label(bp.label_b).status = LabelStatus::removed;
        if (r == Resolution::rename) {
            auto& l = mutable_label(p.at("target").get<LabelId>());
            l.name = p.at("name").get<std::string>();
            l.provenance = Provenance::human_edit;
        }
    } else {
        throw DataError("unknown mutation op \"" + op + "\"");
    }
}

LabelId LabelSpace::add(std::string_view name, Provenance provenance, std::vector<std::string> evidence) {
    const std::string norm = text::normalize_phrase(name);
    ensure_free_name(norm, std::nullopt);
    if (evidence.size() > kMaxEvidence) evidence.resize(kMaxEvidence);
    const auto id = static_cast<LabelId>(labels_.size());
    commit("add", json{{"id", id}, {"name", norm}, {"provenance", to_string(provenance)}, {"evidence", evidence}});
    return id;
}

void LabelSpace::remove(LabelId id) {
    const Label& l = label(id);
    if (l.status == LabelStatus::frozen) throw StateError("label \"" + l.name + "\" is frozen");
    if (l.status == LabelStatus::removed) throw StateError("label \"" + l.name + "\" is already removed");
    commit("remove", json{{"id", id}});
}

void LabelSpace::rename(LabelId id, std::string_view new_name) {
    const Label& l = label(id);
    if (!l.live()) throw StateError("cannot rename removed label \"" + l.name + "\"");
    const std::string norm = text::normalize_phrase(new_name);
    ensure_free_name(norm, id);
    if (norm == l.name) return;
    commit("rename", json{{"id", id}, {"name", norm}});
}

void LabelSpace::freeze(const std::vector<LabelId>& ids) {
    std::vector<LabelId> changing;
    for (auto id : ids) {
        const Label& l = label(id);
        if (l.status == LabelStatus::removed) throw StateError("cannot freeze removed label \"" + l.name + "\"");
        if (l.status == LabelStatus::active && std::find(changing.begin(), changing.end(), id) == changing.end())
            changing.push_back(id);
    }
    if (changing.empty()) return;
    std::sort(changing.begin(), changing.end());
    commit("freeze", json{{"ids", changing}});
}

void LabelSpace::unfreeze_all() {
    std::vector<LabelId> frozen;
    for (const auto& l : labels_) {
        if (l.status == LabelStatus::frozen) frozen.push_back(l.id);
    }
    if (frozen.empty()) return;
    commit("unfreeze", json{{"ids", frozen}});
}

std::int64_t LabelSpace::add_pair(LabelId a, LabelId b, double similarity, std::optional<std::string> judge_opinion) {
    label(a);
    label(b);
    if (a == b) throw StateError("a borderline pair needs two distinct labels");
    const auto id = static_cast<std::int64_t>(pairs_.size());
    json payload{{"id", id}, {"a", a}, {"b", b}, {"similarity", similarity}};
    if (judge_opinion) payload["judge_opinion"] = *judge_opinion;
    commit("pair_add", std::move(payload));
    return id;
}

void LabelSpace::resolve(std::int64_t pair_id, Resolution resolution, std::optional<LabelId> rename_target,
                         std::optional<std::string> new_name) {
    const BorderlinePair& bp = pair(pair_id);
    if (bp.status != PairStatus::pending) throw StateError("pair " + std::to_string(pair_id) + " is not pending");
    json payload{{"id", pair_id}, {"resolution", to_string(resolution)}};
    auto removable = [&](LabelId id) {
        const Label& l = label(id);
        if (l.status != LabelStatus::active)
            throw StateError("label \"" + l.name + "\" is " + std::string(to_string(l.status)) + ", cannot remove");
    };
    switch (resolution) {
        case Resolution::keep_both: break;
        case Resolution::remove_a: removable(bp.label_a); break;
        case Resolution::remove_b: removable(bp.label_b); break;
        case Resolution::rename: {
            if (!rename_target || !new_name) throw ConfigError("rename needs a target label and a new name");
            if (*rename_target != bp.label_a && *rename_target != bp.label_b)
                throw ConfigError("rename target must be one of the pair's labels");
            if (!label(*rename_target).live()) throw StateError("cannot rename a removed label");
            const std::string norm = text::normalize_phrase(*new_name);
            ensure_free_name(norm, *rename_target);
            payload["target"] = *rename_target;
            payload["name"] = norm;
            break;
        }
    }
    commit("pair_resolve", std::move(payload));
}

// ---------------------------------------------------------------------------

namespace {

json label_json(const Label& l) {
    return json{{"id", l.id},
                {"name", l.name},
                {"status", to_string(l.status)},
                {"provenance", to_string(l.provenance)},
                {"created_at_version", l.created_at_version},
                {"evidence", l.evidence}};
}

json pair_json(const BorderlinePair& p) {
    json j{{"id", p.id},
           {"label_a", p.label_a},
           {"label_b", p.label_b},
           {"similarity", p.similarity},
           {"status", to_string(p.status)},
           {"resolution", p.resolution ? json(to_string(*p.resolution)) : json(nullptr)}};
    if (p.judge_opinion) j["judge_opinion"] = *p.judge_opinion;
    return j;
}

}  // namespace

json LabelSpace::to_json() const {
    json labels = json::array();
    for (const auto& l : labels_) labels.push_back(label_json(l));
    json pairs = json::array();
    for (const auto& p : pairs_) pairs.push_back(pair_json(p));
    json log = json::array();
    for (const auto& m : log_) log.push_back(json{{"version", m.version}, {"op", m.op}, {"payload", m.payload}});
    return json{{"version", version_}, {"labels", labels}, {"pairs", pairs}, {"log", log}};
}

LabelSpace LabelSpace::replay(const std::vector<Mutation>& log) {
    LabelSpace s;
    for (const auto& m : log) {
        if (m.version != s.version_ + 1)
            throw DataError("mutation log version gap at " + std::to_string(m.version));
        s.commit(m.op, m.payload);
    }
    return s;
}

LabelSpace LabelSpace::from_json(const json& j) {
    try {
        std::vector<Mutation> log;
        for (const auto& m : j.at("log")) {
            log.push_back({m.at("version").get<std::uint64_t>(), m.at("op").get<std::string>(), m.at("payload")});
        }
        LabelSpace s = replay(log);
        if (s.version_ != j.at("version").get<std::uint64_t>() || s.to_json() != j)
            throw DataError("label space state does not match its mutation log");
        return s;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed label space: ") + e.what());
    }
}

void LabelSpace::save(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << to_json().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

LabelSpace LabelSpace::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read label space " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::string LabelSpace::export_names() const {
    std::string out;
    for (const auto* l : live()) out += l->name + "\n";
    return out;
}

bool LabelSpace::same_state(const LabelSpace& other) const {
    return labels_ == other.labels_ && pairs_ == other.pairs_ && version_ == other.version_ && log_ == other.log_;
}

// ---------------------------------------------------------------------------

std::string normalize_label_response(std::string_view response) {
    std::string line;
    for (auto& l : text::split(response, '\n')) {
        if (!text::trim(l).empty()) {
            line = text::trim(l);
            break;
        }
    }
    if (const auto colon = line.find(':'); colon != std::string::npos) line = line.substr(colon + 1);
    std::string kept;
    for (char c : text::to_lower(line)) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80 || c == '_' || c == '-' || c == '&' || c == '/' || c == '\'') {
            kept.push_back(c);
        } else {
            kept.push_back(' ');
        }
    }
    std::string norm = text::normalize_phrase(kept);
    // Leading or trailing joiners left over from stripped punctuation.
    while (!norm.empty() && (norm.front() == '-' || norm.front() == '/' || norm.front() == '\'')) norm.erase(0, 1);
    while (!norm.empty() && (norm.back() == '-' || norm.back() == '/' || norm.back() == '\'')) norm.pop_back();
    norm = text::collapse_whitespace(norm);
    if (norm.empty() || text::split(norm, ' ').size() > kMaxLabelTokens) return {};
    return norm;
}

SynthesisResult synthesize_label(LabelSpace& space, std::size_t cluster, const std::vector<Chunk>& exemplars,
                                 const std::string& objective, ModelGateway& gateway, const PromptSet& prompts) {
    if (exemplars.empty() || exemplars.size() > 3)
        throw ConfigError("label synthesis takes 1 to 3 exemplar chunks, got " + std::to_string(exemplars.size()));
    std::vector<std::string> texts;
    for (const auto& c : exemplars) texts.push_back(c.text);
    const std::string document = text::join(texts, "\n");

    SynthesisResult result;
    result.cluster = cluster;
    GenerationRequest req = prompts.synthesis.render({{"objective", objective}, {"document", document}}, 32);
    constexpr std::size_t kAttempts = 3;
    for (std::size_t attempt = 0; attempt < kAttempts; ++attempt) {
        ++result.attempts;
        if (attempt > 0) req.user_prompt += "\nAnswer with a short label of at most six words.";
        const std::string name = normalize_label_response(gateway.generate(req, Role::generator));
        if (name.empty()) continue;
        result.name = name;
        if (space.find_live(name)) {
            result.error = "duplicate of existing label \"" + name + "\"";
            return result;
        }
        std::vector<std::string> evidence;
        for (const auto& t : texts) evidence.push_back(t.size() > 280 ? t.substr(0, 280) : t);
        result.label = space.add(name, Provenance::cluster_synthesis, std::move(evidence));
        return result;
    }
    result.error = "no usable label after " + std::to_string(kAttempts) + " attempts";
    return result;
}

// ---------------------------------------------------------------------------

DedupReport deduplicate(LabelSpace& space, SimilarityModel& similarity, PairJudge* judge,
                        const DedupOptions& options) {
    if (!(options.low_threshold <= options.high_threshold))
        throw ConfigError("dedup thresholds must satisfy low <= high");
    DedupReport report;
    const auto ids = space.live_ids();
    if (ids.size() < 2) return report;
    {
        std::vector<std::string> names;
        for (auto id : ids) names.push_back(space.label(id).name);
        similarity.prepare(names);
    }
    const std::size_t judge_before = judge ? judge->calls() : 0;

    // Picks which of the two to drop: the later-created one unless it is frozen.
    auto victim = [&](LabelId a, LabelId b) -> std::optional<LabelId> {
        const Label& la = space.label(a);
        const Label& lb = space.label(b);
        const bool b_later = std::tie(lb.created_at_version, lb.id) > std::tie(la.created_at_version, la.id);
        const LabelId later = b_later ? b : a;
        const LabelId earlier = b_later ? a : b;
        if (space.label(later).status == LabelStatus::active) return later;
        if (space.label(earlier).status == LabelStatus::active) return earlier;
        return std::nullopt;
    };

    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const LabelId a = ids[i];
            const LabelId b = ids[j];
            if (!space.label(a).live() || !space.label(b).live()) continue;
            const double sim = similarity.similarity(space.label(a).name, space.label(b).name);
            if (sim >= options.high_threshold) {
                if (auto v = victim(a, b)) {
                    space.remove(*v);
                    report.removed.push_back(*v);
                }
                continue;
            }
            if (sim < options.low_threshold || space.has_pair(a, b)) continue;

            if (!judge || !options.auto_judge) {
                report.pairs.push_back(space.add_pair(a, b, sim));
                continue;
            }
            const Verdict verdict = judge->judge(space.label(a).name, space.label(b).name);
            const auto pid = space.add_pair(a, b, sim, std::string(to_string(verdict)));
            report.pairs.push_back(pid);
            if (verdict == Verdict::no) {
                space.resolve(pid, Resolution::keep_both);
            } else if (verdict == Verdict::yes) {
                if (auto v = victim(a, b)) {
                    space.resolve(pid, *v == a ? Resolution::remove_a : Resolution::remove_b);
                    report.removed.push_back(*v);
                }
            }
        }
    }
    if (judge) report.judge_calls = judge->calls() - judge_before;
    return report;
}

}  // namespace labelscout
