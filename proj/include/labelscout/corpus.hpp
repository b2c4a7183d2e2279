#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace labelscout {

enum class Split { train, test };

struct Document {
    std::string id;
    std::string text;
    std::vector<std::string> gold_labels;  // evaluation only
    Split split = Split::train;
};

struct Chunk {
    std::string doc_id;
    std::size_t index = 0;
    std::string text;  // tokens joined by single spaces
    std::size_t token_count = 0;
};

/// Immutable once built. Document ids are unique.
class Corpus {
public:
    Corpus() = default;
    /// Throws DataError on a duplicate id or blank text.
    explicit Corpus(std::vector<Document> docs);

    const std::vector<Document>& documents() const noexcept { return docs_; }
    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }
    const Document& at(std::string_view id) const;
    const Document* find(std::string_view id) const;
    bool has_gold_labels() const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { jsonl };

/// Reads a corpus file. JSON-lines records: {id, text, labels?, split?}.
/// Blank lines are skipped; errors cite the 1-based line number.
Corpus ingest(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::jsonl);
Corpus parse_jsonl(std::string_view content);

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);

inline constexpr std::size_t kDefaultChunkSize = 50;

std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size = kDefaultChunkSize);

/// Chunks every document in `ids` order (or corpus order when empty).
std::vector<Chunk> chunk_documents(const Corpus& corpus, const std::vector<std::string>& ids,
                                   std::size_t chunk_size);

struct CorpusSubset {
    std::vector<std::string> ids;
    std::uint64_t seed = 0;
    std::size_t size = 0;
};

/// Shuffle-by-seed then take prefix, so growing `size` keeps earlier
/// subsets as prefixes.
CorpusSubset sample_subset(const Corpus& corpus, std::uint64_t seed, std::size_t size);

/// Seeded Fisher-Yates permutation of [0, n). Portable across standard libraries.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace labelscout
