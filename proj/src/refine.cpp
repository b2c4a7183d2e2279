#include "labelscout/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "labelscout/digest.hpp"

namespace labelscout {

using nlohmann::json;

void RefineConfig::validate() const {
    if (keyphrase_min_count < 1) throw ConfigError("keyphrase_min_count must be >= 1");
    if (!(longtail_fraction > 0.0 && longtail_fraction < 1.0))
        throw ConfigError("longtail_fraction must lie in (0, 1)");
    if (!(freeze_fraction >= 0.0 && freeze_fraction <= 1.0)) throw ConfigError("freeze_fraction must lie in [0, 1]");
}

std::vector<std::size_t> select_low_confidence(const std::vector<InstanceTop>& chunk_tops, std::size_t subset_size,
                                               std::vector<std::string>* warnings) {
    if (subset_size == 0) {
        if (warnings) warnings->push_back("low-confidence subset size is 0; nothing selected");
        return {};
    }
    if (subset_size > chunk_tops.size()) {
        if (warnings)
            warnings->push_back("low-confidence subset size " + std::to_string(subset_size) + " clamped to " +
                                std::to_string(chunk_tops.size()) + " available chunks");
        subset_size = chunk_tops.size();
    }
    std::vector<const InstanceTop*> order;
    for (const auto& t : chunk_tops) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const InstanceTop* a, const InstanceTop* b) {
        if (a->top_score() != b->top_score()) return a->top_score() < b->top_score();
        return a->instance < b->instance;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < subset_size; ++i) out.push_back(order[i]->instance);
    return out;
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw ConfigError("median of an empty list");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

namespace {

double max_similarity(const std::string& text, const LabelSpace& space, SimilarityModel& similarity) {
    double best = -1.0;
    for (const auto* l : space.live()) best = std::max(best, similarity.similarity(text, l->name));
    return best;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

GammaThreshold compute_gamma(const KeyphraseSet& keyphrases, const LabelSpace& space, SimilarityModel& similarity,
                             double longtail_fraction) {
    if (space.live().empty()) throw GammaUndefinedError("no live labels to compare keyphrases against");
    const double cutoff = longtail_fraction * static_cast<double>(keyphrases.total());
    GammaThreshold g;
    for (const auto& [text, freq] : keyphrases.frequencies()) {
        if (static_cast<double>(freq) < cutoff) g.candidates.push_back(text);
    }
    if (g.candidates.empty()) throw GammaUndefinedError("no keyphrase occurs in fewer than the long-tail share of entries");

    std::vector<std::string> texts = g.candidates;
    for (const auto* l : space.live()) texts.push_back(l->name);
    similarity.prepare(texts);

    std::string material;
    for (const auto& c : g.candidates) {
        g.max_similarities.push_back(max_similarity(c, space, similarity));
        material += c + '\t' + format_real(g.max_similarities.back()) + '\n';
    }
    g.value = lower_median(g.max_similarities);
    g.digest = sha256_hex(material);
    return g;
}

std::vector<Promotion> promote_keyphrases(const std::vector<ChunkRef>& low_confidence, const KeyphraseSet& keyphrases,
                                          LabelSpace& space, SimilarityModel& similarity, const GammaThreshold& gamma,
                                          std::size_t min_count) {
    std::set<std::string> pool;
    for (const auto& ref : low_confidence) {
        for (auto idx : keyphrases.entries_for_chunk(ref)) pool.insert(keyphrases.entries()[idx].text);
    }
    std::vector<std::pair<std::size_t, std::string>> ordered;
    for (const auto& t : pool) ordered.emplace_back(keyphrases.frequency(t), t);
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    std::vector<Promotion> out;
    for (const auto& [freq, t] : ordered) {
        if (freq <= min_count) continue;
        if (space.find_live(t)) continue;
        const double sim = max_similarity(t, space, similarity);
        if (!(sim < gamma.value)) continue;
        std::vector<std::string> evidence;
        for (const auto& ref : low_confidence) {
            if (evidence.size() >= kMaxEvidence) break;
            for (auto idx : keyphrases.entries_for_chunk(ref)) {
                if (keyphrases.entries()[idx].text == t) {
                    evidence.push_back(ref.doc_id + "#" + std::to_string(ref.chunk_index));
                    break;
                }
            }
        }
        const LabelId id = space.add(t, Provenance::refine_promotion, std::move(evidence));
        out.push_back({id, t, freq, min_count, sim, gamma.value});
    }
    return out;
}

PruneReport prune_and_freeze(LabelSpace& space, const std::vector<InstanceTop>& tops,
                             const std::vector<LabelId>& scored_labels, double freeze_fraction,
                             std::size_t min_support) {
    PruneReport report;
    std::vector<LabelId> scored;
    for (auto id : scored_labels) {
        if (space.label(id).live()) scored.push_back(id);
    }
    for (auto id : scored) report.support[id] = 0;
    for (const auto& t : tops) {
        auto it = report.support.find(t.top());
        if (it != report.support.end()) ++it->second;
    }

    std::vector<LabelId> doomed;
    for (auto id : scored) {
        if (space.label(id).status == LabelStatus::active && report.support[id] < min_support) doomed.push_back(id);
    }
    if (!doomed.empty() && doomed.size() >= space.live().size()) {
        report.aborted = true;
    } else {
        for (auto id : doomed) {
            space.remove(id);
            report.removed.push_back(id);
        }
    }

    std::vector<LabelId> remaining;
    for (auto id : scored) {
        if (space.label(id).live()) remaining.push_back(id);
    }
    std::sort(remaining.begin(), remaining.end(), [&](LabelId a, LabelId b) {
        if (report.support[a] != report.support[b]) return report.support[a] > report.support[b];
        return a < b;
    });
    const auto n_freeze = static_cast<std::size_t>(std::floor(freeze_fraction * static_cast<double>(remaining.size())));
    std::vector<LabelId> to_freeze;
    for (std::size_t i = 0; i < n_freeze; ++i) {
        if (space.label(remaining[i]).status == LabelStatus::active) to_freeze.push_back(remaining[i]);
    }
    space.freeze(to_freeze);
    report.frozen = to_freeze;
    return report;
}

json to_json(const IterationRecord& r) {
    json promotions = json::array();
    for (const auto& p : r.promotions) {
        promotions.push_back(json{{"label", p.label},
                                  {"text", p.text},
                                  {"frequency", p.frequency},
                                  {"min_count", p.min_count},
                                  {"max_similarity", p.max_similarity},
                                  {"gamma", p.gamma}});
    }
    json j{{"iteration", r.iteration},
           {"added", r.added},
           {"removed", r.removed},
           {"frozen", r.frozen},
           {"low_confidence", r.low_confidence},
           {"promotions", promotions},
           {"coverage", r.coverage ? json(*r.coverage) : json(nullptr)},
           {"version", r.version},
           {"warnings", r.warnings}};
    if (r.gamma) {
        j["gamma"] = json{{"value", r.gamma->value},
                          {"candidate_count", r.gamma->candidate_count()},
                          {"max_similarities", r.gamma->max_similarities},
                          {"digest", r.gamma->digest}};
    } else {
        j["gamma"] = nullptr;
    }
    return j;
}

std::vector<IterationRecord> run_refinement(const std::vector<const Document*>& docs, const KeyphraseSet& keyphrases,
                                            LabelSpace& space, const RefineConfig& config, ModelGateway& gateway,
                                            SimilarityModel& similarity, const ClassifyOptions& classify,
                                            const CoverageProbe& probe) {
    config.validate();
    if (space.live().empty()) throw StateError("refinement needs a non-empty label space");
    std::vector<IterationRecord> records;
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const LabelSpace snapshot = space;
        IterationRecord rec;
        rec.iteration = it;
        try {
            const auto result = classify_documents(docs, &keyphrases, space, gateway, classify);
            std::vector<InstanceTop> chunk_tops;
            for (const auto& t : result.tops) {
                if (result.instances[t.instance].kind == InstanceKind::chunk) chunk_tops.push_back(t);
            }
            const auto low = select_low_confidence(chunk_tops, config.subset_size, &rec.warnings);
            rec.low_confidence = low.size();
            std::vector<ChunkRef> refs;
            for (auto id : low) refs.push_back({result.instances[id].doc_id, result.instances[id].chunk_index});

            try {
                rec.gamma = compute_gamma(keyphrases, space, similarity, config.longtail_fraction);
            } catch (const GammaUndefinedError& e) {
                rec.warnings.push_back(std::string("promotion skipped: ") + e.what());
            }
            if (rec.gamma) {
                rec.promotions =
                    promote_keyphrases(refs, keyphrases, space, similarity, *rec.gamma, config.keyphrase_min_count);
                for (const auto& p : rec.promotions) rec.added.push_back(p.label);
            }

            const auto prune = prune_and_freeze(space, result.tops, result.matrix.label_ids, config.freeze_fraction,
                                                config.min_support);
            rec.removed = prune.removed;
            rec.frozen = prune.frozen;
            if (prune.aborted) rec.warnings.push_back("pruning aborted: it would have emptied the label space");
            if (probe) rec.coverage = probe(space);
            rec.version = space.version();
        } catch (...) {
            space = snapshot;
            throw;
        }
        records.push_back(std::move(rec));
    }
    space.unfreeze_all();
    return records;
}

}  // namespace labelscout
