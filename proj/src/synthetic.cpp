#include "labelscout/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "labelscout/error.hpp"
#include "labelscout/mock.hpp"
#include "labelscout/prompts.hpp"

namespace labelscout {

namespace {

constexpr const char* kPool[] = {
    "astronomy",  "baking",     "banking",    "beekeeping", "biology",    "botany",      "boxing",
    "calligraphy", "camping",   "cardiology", "carpentry",  "ceramics",   "chemistry",   "chess",
    "climbing",   "cricket",    "cryptography", "cycling",  "dentistry",  "diplomacy",   "ecology",
    "economics",  "education",  "elections",  "energy",     "engineering", "entomology", "farming",
    "fashion",    "fencing",    "finance",    "fisheries",  "forestry",   "gardening",   "genetics",
    "geology",    "glaciology", "golf",       "hiking",     "history",    "hockey",      "horology",
    "hydrology",  "immigration", "insurance", "jazz",       "journalism", "knitting",    "linguistics",
    "literature", "logistics",  "magnetism",  "marketing",  "mathematics", "medicine",   "meteorology",
    "mining",     "mycology",   "mythology",  "navigation", "neurology",  "numismatics", "nutrition",
    "oceanography", "oncology", "opera",      "optics",     "ornithology", "painting",   "paleontology",
    "pharmacy",   "philately",  "philosophy", "photography", "physics",   "poetry",      "politics",
    "pottery",    "psychology", "railways",   "recycling",  "robotics",   "rowing",      "sailing",
    "sculpture",  "seismology", "shipping",   "skiing",     "soccer",     "sociology",   "surfing",
    "surgery",    "swimming",   "taxation",   "tennis",     "textiles",   "theatre",     "tourism",
    "toxicology", "trade",      "typography", "vaccines",   "viticulture", "volcanology", "weaving",
    "wrestling",  "zoology",    "aviation",   "archery",    "architecture", "agriculture", "anatomy",
    "acoustics",  "cartography", "cinema",    "cuisine",    "dance",      "demography",  "epidemiology",
    "forensics",  "heraldry",   "lexicography", "metallurgy", "microbiology", "origami",  "parenting",
    "perfumery",  "radiology",  "rugby",      "sewing",     "speleology", "statistics",  "telecom",
};

constexpr const char* kFiller[] = {"the",   "and",   "of",    "with",   "in",    "report", "notes", "brief",
                                   "item",  "about", "update", "general", "some", "many",   "new",   "recent",
                                   "issue", "topic", "series", "detail"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

struct WordSims {
    std::uint64_t seed;
    std::map<std::string, EmbeddingVector> memo;
    double operator()(const std::string& a, const std::string& b) {
        auto get = [&](const std::string& w) -> const EmbeddingVector& {
            auto it = memo.find(w);
            if (it == memo.end()) it = memo.emplace(w, mock::embedding(w, seed)).first;
            return it->second;
        };
        return cosine(get(a), get(b));
    }
    double max_to(const std::string& w, const std::vector<std::string>& others) {
        double best = -1.0;
        for (const auto& o : others) best = std::max(best, (*this)(w, o));
        return best;
    }
};

std::string make_chunk(const std::string& topic, const SyntheticOptions& o, std::mt19937_64& rng) {
    std::vector<std::string> tokens(o.chunk_size);
    std::vector<bool> is_topic(o.chunk_size, false);
    is_topic[0] = true;
    std::size_t placed = 1;
    while (placed < std::min(o.topic_repeats, o.chunk_size)) {
        const auto i = pick(rng, o.chunk_size);
        if (!is_topic[i]) {
            is_topic[i] = true;
            ++placed;
        }
    }
    constexpr std::size_t n_filler = sizeof(kFiller) / sizeof(kFiller[0]);
    for (std::size_t i = 0; i < o.chunk_size; ++i) tokens[i] = is_topic[i] ? topic : kFiller[pick(rng, n_filler)];
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::vector<std::string> SyntheticCorpus::planted() const {
    std::vector<std::string> out = head;
    out.insert(out.end(), longtail.begin(), longtail.end());
    return out;
}

std::map<std::string, std::vector<std::string>> SyntheticCorpus::gold() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& d : corpus.documents()) out[d.id] = d.gold_labels;
    return out;
}

SyntheticCorpus generate_synthetic(const SyntheticOptions& o) {
    if (o.head_labels < 1 || o.documents < o.longtail_labels + o.head_labels)
        throw ConfigError("synthetic corpus needs at least one head label and enough documents");
    if (o.planted_prefix > o.documents || o.planted_prefix < o.longtail_labels + o.noise_words)
        throw ConfigError("planted prefix must fit the long-tail and noise documents");
    if (o.topic_repeats < 1 || o.topic_repeats > o.chunk_size) throw ConfigError("topic_repeats must be in [1, chunk_size]");

    std::mt19937_64 rng(o.seed);
    std::vector<std::string> pool(std::begin(kPool), std::end(kPool));
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[pick(rng, i)]);

    WordSims sim{o.mock_seed, {}};
    SyntheticCorpus out;
    std::set<std::string> used;
    for (const auto& w : pool) {
        if (out.head.size() == o.head_labels) break;
        if (sim.max_to(w, out.head) < 0.35) {
            out.head.push_back(w);
            used.insert(w);
        }
    }
    for (const auto& w : pool) {
        if (out.longtail.size() == o.longtail_labels) break;
        if (used.contains(w)) continue;
        if (sim.max_to(w, out.head) < 0.12 && sim.max_to(w, out.longtail) < 0.12) {
            out.longtail.push_back(w);
            used.insert(w);
        }
    }
    for (const auto& w : pool) {
        if (out.noise.size() == o.noise_words) break;
        if (used.contains(w)) continue;
        const double to_head = sim.max_to(w, out.head);
        if (to_head >= 0.25 && to_head < 0.5 && sim.max_to(w, out.longtail) < 0.12 && sim.max_to(w, out.noise) < 0.5) {
            out.noise.push_back(w);
            used.insert(w);
        }
    }
    if (out.head.size() < o.head_labels || out.longtail.size() < o.longtail_labels || out.noise.size() < o.noise_words)
        throw DataError("synthetic word pool exhausted for seed " + std::to_string(o.seed) + " / mock seed " +
                        std::to_string(o.mock_seed));

    // Document slots: long-tail and noise-carrying documents sit inside the
    // discovery subset prefix.
    const auto perm = seeded_permutation(o.documents, o.subset_seed);
    std::vector<int> longtail_of(o.documents, -1);
    std::vector<std::vector<std::size_t>> noise_of(o.documents);
    for (std::size_t i = 0; i < o.longtail_labels; ++i) {
        longtail_of[perm[(i + 1) * o.planted_prefix / (o.longtail_labels + 1)]] = static_cast<int>(i);
    }
    {
        std::size_t slot = 0;
        for (std::size_t w = 0; w < o.noise_words; ++w) {
            const std::size_t copies = 1 + w % 2;
            for (std::size_t c = 0; c < copies; ++c) {
                std::size_t doc = perm[slot++ % o.planted_prefix];
                while (longtail_of[doc] >= 0) doc = perm[slot++ % o.planted_prefix];
                noise_of[doc].push_back(w);
            }
        }
    }

    std::vector<Document> docs;
    char id[32];
    for (std::size_t d = 0; d < o.documents; ++d) {
        std::snprintf(id, sizeof id, "doc-%03zu", d);
        Document doc;
        doc.id = id;
        std::vector<std::string> chunk_topics;
        if (longtail_of[d] >= 0) {
            const auto& w = out.longtail[static_cast<std::size_t>(longtail_of[d])];
            doc.gold_labels = {w};
            chunk_topics.assign(o.longtail_chunks, w);
        } else {
            const std::size_t first = pick(rng, o.head_labels);
            doc.gold_labels = {out.head[first]};
            if (pick(rng, 100) < 35) {
                std::size_t second = pick(rng, o.head_labels - 1);
                if (second >= first) ++second;
                if (o.head_labels > 1) doc.gold_labels.push_back(out.head[second]);
            }
            const std::size_t n_chunks = 2 + pick(rng, 4);
            for (std::size_t c = 0; c < n_chunks; ++c) chunk_topics.push_back(doc.gold_labels[c % doc.gold_labels.size()]);
            for (auto w : noise_of[d]) chunk_topics.push_back(out.noise[w]);
        }
        std::string text;
        for (const auto& t : chunk_topics) {
            if (!text.empty()) text += ' ';
            text += make_chunk(t, o, rng);
        }
        doc.text = std::move(text);
        doc.split = d % 5 == 4 ? Split::test : Split::train;
        docs.push_back(std::move(doc));
    }

    // Each planted chunk must pick its own label under mock entailment.
    const auto planted = out.planted();
    std::vector<std::string> hypotheses;
    for (const auto& p : planted) {
        std::string h = kDefaultHypothesis;
        h.replace(h.find("{label}"), 7, p);
        hypotheses.push_back(std::move(h));
    }
    for (const auto& doc : docs) {
        for (const auto& c : chunk_document(doc, o.chunk_size)) {
            const std::string topic = c.text.substr(0, c.text.find(' '));
            const auto own = std::find(planted.begin(), planted.end(), topic);
            if (own == planted.end()) continue;
            const auto own_idx = static_cast<std::size_t>(own - planted.begin());
            const double own_score = mock::entailment(c.text, hypotheses[own_idx], o.mock_seed);
            for (std::size_t j = 0; j < planted.size(); ++j) {
                if (j != own_idx && mock::entailment(c.text, hypotheses[j], o.mock_seed) >= own_score)
                    throw DataError("synthetic chunk " + c.doc_id + "#" + std::to_string(c.index) +
                                    " does not rank its own label first");
            }
        }
    }
    out.corpus = Corpus(std::move(docs));
    return out;
}

nlohmann::json synthetic_config(const std::string& corpus_path, const std::string& run_dir,
                                const SyntheticOptions& o) {
    using nlohmann::json;
    const json mock{{"type", "mock"}, {"seed", o.mock_seed}};
    return json{
        {"corpus", corpus_path},
        {"run_dir", run_dir},
        {"objective", "Assign topic labels to short subject notes."},
        {"seed", o.subset_seed},
        {"chunk_size", o.chunk_size},
        {"discovery",
         {{"initial_subset", o.planted_prefix},
          {"increment", 50},
          {"max_subset", o.documents},
          {"k_hint", o.head_labels},
          {"target_dim", 16},
          {"gmm_restarts", 10}}},
        {"refine", {{"subset_size", 80}, {"iterations", 5}}},
        {"evaluate", {{"k", {1, 3}}, {"match_mode", "covered"}, {"judge_mode", "llm"}}},
        {"backends",
         {{"generator", mock},
          {"judge", {{"type", "mock"}, {"seed", o.mock_seed}, {"default", "No"}}},
          {"embedder", mock},
          {"nli", mock}}}};
}

}  // namespace labelscout
