#include "labelscout/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <numeric>

#include <json.hpp>

#include "labelscout/parallel.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

std::string hypothesis_for(const std::string& tmpl, const std::string& label) {
    std::string out = tmpl;
    const std::string slot = "{label}";
    for (auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + label.size())) {
        out.replace(pos, slot.size(), label);
    }
    return out;
}

EntailmentMatrix score_all(const std::vector<Instance>& instances, const std::vector<LabelRef>& labels,
                           const HypothesisTemplates& templates, ModelGateway& gateway) {
    if (instances.empty()) throw ConfigError("score_all needs at least one instance");
    if (labels.empty()) throw ConfigError("score_all needs at least one label");

    EntailmentMatrix m;
    m.rows = instances.size();
    for (const auto& l : labels) m.label_ids.push_back(l.id);
    m.scores.assign(m.rows * labels.size(), 0.0);

    std::vector<std::string> chunk_hyp;
    std::vector<std::string> phrase_hyp;
    for (const auto& l : labels) {
        chunk_hyp.push_back(hypothesis_for(templates.chunk, l.name));
        phrase_hyp.push_back(hypothesis_for(templates.keyphrase, l.name));
    }

    const std::size_t cols = labels.size();
    std::mutex mu;
    std::size_t failed = m.scores.size();
    std::string failure;
    parallel_for(m.scores.size(), gateway.options().max_in_flight, [&](std::size_t k) {
        const auto& inst = instances[k / cols];
        const auto& hyp = inst.kind == InstanceKind::chunk ? chunk_hyp[k % cols] : phrase_hyp[k % cols];
        try {
            m.scores[k] = gateway.entail({inst.text, hyp});
        } catch (const GatewayError& e) {
            std::lock_guard lock(mu);
            if (k < failed) {
                failed = k;
                failure = e.what();
            }
        }
    });
    if (failed < m.scores.size()) {
        const std::size_t row = failed / cols;
        throw PartialMatrixError("entailment scoring failed at instance " + std::to_string(row) + ": " + failure, row);
    }
    return m;
}

std::vector<InstanceTop> top_rank(const EntailmentMatrix& matrix) {
    std::vector<InstanceTop> out;
    out.reserve(matrix.rows);
    std::vector<std::size_t> order(matrix.cols());
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double sa = matrix.at(r, a);
            const double sb = matrix.at(r, b);
            if (sa != sb) return sa > sb;
            return matrix.label_ids[a] < matrix.label_ids[b];
        });
        InstanceTop t;
        t.instance = r;
        for (auto c : order) {
            t.ranking.push_back(matrix.label_ids[c]);
            t.ranked_scores.push_back(matrix.at(r, c));
        }
        out.push_back(std::move(t));
    }
    return out;
}

Prediction aggregate(const DocumentGroup& group, const std::vector<InstanceTop>& tops, std::size_t max_ranks) {
    if (group.members.empty()) throw ConfigError("cannot aggregate an empty group for " + group.doc_id);
    Prediction p;
    p.doc_id = group.doc_id;
    std::size_t positions = 0;
    for (auto m : group.members) {
        if (m >= tops.size()) throw ConfigError("group member " + std::to_string(m) + " has no ranking");
        positions = std::max(positions, tops[m].ranking.size());
    }

    struct Tally {
        std::size_t count = 0;
        std::vector<double> scores;
    };
    for (std::size_t r = 0; r < std::min(max_ranks, positions); ++r) {
        std::map<LabelId, Tally> tally;
        for (auto m : group.members) {
            const auto& t = tops[m];
            if (r >= t.ranking.size()) continue;
            const LabelId l = t.ranking[r];
            if (std::find(p.labels.begin(), p.labels.end(), l) != p.labels.end()) continue;
            auto& e = tally[l];
            ++e.count;
            e.scores.push_back(t.ranked_scores[r]);
        }
        if (tally.empty()) break;

        LabelId best = 0;
        std::size_t best_count = 0;
        double best_mean = 0.0;
        for (auto& [label, e] : tally) {
            // Sorted summation keeps the mean independent of member order.
            std::sort(e.scores.begin(), e.scores.end());
            const double mean = std::accumulate(e.scores.begin(), e.scores.end(), 0.0) / static_cast<double>(e.count);
            // std::map iterates ascending ids, so strict comparisons keep the lower id on ties.
            if (e.count > best_count || (e.count == best_count && mean > best_mean)) {
                best = label;
                best_count = e.count;
                best_mean = mean;
            }
        }
        p.labels.push_back(best);
        p.supports.push_back(best_count);
        p.scores.push_back(best_mean);
    }
    return p;
}

ClassificationResult classify_documents(const std::vector<const Document*>& docs, const KeyphraseSet* keyphrases,
                                        const LabelSpace& space, ModelGateway& gateway,
                                        const ClassifyOptions& options) {
    if (options.max_ranks < 1) throw ConfigError("max_ranks must be >= 1");
    std::vector<LabelRef> labels;
    for (const auto* l : space.live()) labels.push_back({l->id, l->name});
    if (labels.empty()) throw StateError("label space has no active or frozen labels");

    ClassificationResult result;
    std::map<std::string, DocumentGroup> groups;
    for (const auto* doc : docs) {
        auto& g = groups[doc->id];
        g.doc_id = doc->id;
        for (auto& c : chunk_document(*doc, options.chunk_size)) {
            g.members.push_back(result.instances.size());
            result.instances.push_back({c.doc_id, std::move(c.text), InstanceKind::chunk, c.index});
        }
    }
    if (keyphrases) {
        for (const auto* doc : docs) {
            auto& g = groups[doc->id];
            for (auto idx : keyphrases->entries_for_doc(doc->id)) {
                const auto& k = keyphrases->entries()[idx];
                g.members.push_back(result.instances.size());
                result.instances.push_back({doc->id, k.text, InstanceKind::keyphrase, k.source.chunk_index});
            }
        }
    }
    if (result.instances.empty()) return result;

    result.matrix = score_all(result.instances, labels, options.templates, gateway);
    result.tops = top_rank(result.matrix);
    for (const auto& [id, group] : groups) {
        Prediction p = aggregate(group, result.tops, options.max_ranks);
        for (auto l : p.labels) p.names.push_back(space.label(l).name);
        result.predictions.push_back(std::move(p));
    }
    return result;
}

ClassificationResult classify_corpus(const Corpus& corpus, const KeyphraseSet* keyphrases, const LabelSpace& space,
                                     ModelGateway& gateway, const ClassifyOptions& options) {
    std::vector<const Document*> docs;
    for (const auto& d : corpus.documents()) docs.push_back(&d);
    return classify_documents(docs, keyphrases, space, gateway, options);
}

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& p : predictions) {
        out << json{{"doc_id", p.doc_id},
                    {"labels", p.names},
                    {"label_ids", p.labels},
                    {"scores", p.scores},
                    {"supports", p.supports}}
                   .dump()
            << '\n';
    }
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read predictions file " + path.string());
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            Prediction p;
            p.doc_id = j.at("doc_id").get<std::string>();
            p.names = j.at("labels").get<std::vector<std::string>>();
            p.labels = j.value("label_ids", std::vector<LabelId>{});
            p.scores = j.value("scores", std::vector<double>{});
            p.supports = j.value("supports", std::vector<std::size_t>{});
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad prediction record: ") + e.what(), line_no);
        }
    }
    return out;
}

}  // namespace labelscout
