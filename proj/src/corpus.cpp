#include "labelscout/corpus.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "labelscout/error.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
    index_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& doc = docs_[i];
        if (doc.id.empty()) throw DataError("document " + std::to_string(i) + " has an empty id");
        if (text::trim(doc.text).empty()) throw DataError("document \"" + doc.id + "\" has empty text");
        if (!index_.emplace(doc.id, i).second) throw DataError("duplicate document id \"" + doc.id + "\"");
    }
}

const Document& Corpus::at(std::string_view id) const {
    const Document* doc = find(id);
    if (!doc) throw DataError("unknown document id \"" + std::string(id) + "\"");
    return *doc;
}

const Document* Corpus::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &docs_[it->second];
}

bool Corpus::has_gold_labels() const {
    for (const auto& doc : docs_) {
        if (!doc.gold_labels.empty()) return true;
    }
    return false;
}

Corpus parse_jsonl(std::string_view content) {
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        const std::string_view line = content.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (text::trim(line).empty()) {
            if (end == content.size()) break;
            continue;
        }

        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!record.is_object()) throw ParseError("record is not an object", line_no);
        if (!record.contains("id") || !record["id"].is_string())
            throw ParseError("missing string field \"id\"", line_no);
        if (!record.contains("text") || !record["text"].is_string())
            throw ParseError("missing string field \"text\"", line_no);

        Document doc;
        doc.id = record["id"].get<std::string>();
        doc.text = record["text"].get<std::string>();
        if (doc.id.empty()) throw ParseError("empty id", line_no);
        if (text::trim(doc.text).empty()) throw ParseError("empty text for \"" + doc.id + "\"", line_no);
        if (record.contains("labels")) {
            const auto& labels = record["labels"];
            if (!labels.is_array()) throw ParseError("\"labels\" must be an array of strings", line_no);
            for (const auto& l : labels) {
                if (!l.is_string()) throw ParseError("\"labels\" must be an array of strings", line_no);
                doc.gold_labels.push_back(l.get<std::string>());
            }
        }
        if (record.contains("split")) {
            if (!record["split"].is_string()) throw ParseError("\"split\" must be a string", line_no);
            const auto split = record["split"].get<std::string>();
            if (split == "train") {
                doc.split = Split::train;
            } else if (split == "test") {
                doc.split = Split::test;
            } else {
                throw ParseError("unknown split \"" + split + "\"", line_no);
            }
        }
        if (auto [it, inserted] = seen.emplace(doc.id, line_no); !inserted) {
            throw DataError("duplicate document id \"" + doc.id + "\" at line " + std::to_string(line_no) +
                            " (first seen at line " + std::to_string(it->second) + ")");
        }
        docs.push_back(std::move(doc));
        if (end == content.size()) break;
    }
    return Corpus(std::move(docs));
}

Corpus ingest(const std::filesystem::path& path, CorpusFormat format) {
    if (format != CorpusFormat::jsonl) throw ConfigError("unsupported corpus format");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open corpus file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_jsonl(buf.str());
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& doc : corpus.documents()) {
        json record = {{"id", doc.id}, {"text", doc.text}};
        if (!doc.gold_labels.empty()) record["labels"] = doc.gold_labels;
        record["split"] = doc.split == Split::train ? "train" : "test";
        out << record.dump() << '\n';
    }
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size) {
    if (chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
    const auto tokens = text::tokenize(doc.text);
    if (tokens.empty()) throw DataError("document \"" + doc.id + "\" is empty");

    std::vector<Chunk> chunks;
    chunks.reserve((tokens.size() + chunk_size - 1) / chunk_size);
    for (std::size_t begin = 0; begin < tokens.size(); begin += chunk_size) {
        const std::size_t end = std::min(begin + chunk_size, tokens.size());
        Chunk chunk;
        chunk.doc_id = doc.id;
        chunk.index = chunks.size();
        chunk.token_count = end - begin;
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) chunk.text.push_back(' ');
            chunk.text.append(tokens[i]);
        }
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

std::vector<Chunk> chunk_documents(const Corpus& corpus, const std::vector<std::string>& ids,
                                   std::size_t chunk_size) {
    std::vector<Chunk> out;
    auto append = [&](const Document& doc) {
        auto chunks = chunk_document(doc, chunk_size);
        std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
    };
    if (ids.empty()) {
        for (const auto& doc : corpus.documents()) append(doc);
    } else {
        for (const auto& id : ids) append(corpus.at(id));
    }
    return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        // unbiased draw in [0, i) by rejection
        const std::uint64_t bound = static_cast<std::uint64_t>(i);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw = rng();
        while (draw >= limit) draw = rng();
        std::swap(perm[i - 1], perm[draw % bound]);
    }
    return perm;
}

CorpusSubset sample_subset(const Corpus& corpus, std::uint64_t seed, std::size_t size) {
    if (size > corpus.size()) {
        throw ConfigError("subset size " + std::to_string(size) + " exceeds corpus size " +
                          std::to_string(corpus.size()));
    }
    CorpusSubset subset;
    subset.seed = seed;
    subset.size = size;
    const auto perm = seeded_permutation(corpus.size(), seed);
    subset.ids.reserve(size);
    for (std::size_t i = 0; i < size; ++i) subset.ids.push_back(corpus.documents()[perm[i]].id);
    return subset;
}

}  // namespace labelscout
