#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "labelscout/corpus.hpp"
#include "labelscout/error.hpp"
#include "labelscout/gateway.hpp"
#include "labelscout/prompts.hpp"

namespace labelscout {

enum class Granularity { coarse, fine, unspecified };

std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

struct ChunkRef {
    std::string doc_id;
    std::size_t chunk_index = 0;
    auto operator<=>(const ChunkRef&) const = default;
};

struct Keyphrase {
    std::string text;  // normalized
    ChunkRef source;
    Granularity granularity = Granularity::unspecified;
};

struct ObjectiveDescription {
    std::string text;
    std::vector<std::string> demonstrations;

    /// Objective text followed by demonstrations, as inserted into prompts.
    std::string render() const;
};

inline constexpr std::size_t kMaxPhrasesPerChunk = 4;
inline constexpr std::size_t kMaxPhraseTokens = 10;

struct ParsedPhrase {
    std::string text;
    Granularity granularity = Granularity::unspecified;
};

/// Parses an LLM keyphrase response. Accepts `[keyphrase] ... [/keyphrase]`
/// markers, comma/semicolon/newline separated lists and `1.`-style
/// enumerations. Lines headed `coarse...:` / `fine...:` tag granularity.
/// Phrases are normalized, phrases over 10 tokens dropped, duplicates
/// collapsed and the result capped at 4.
std::vector<ParsedPhrase> parse_keyphrase_response(std::string_view response);

struct ExtractionError : DataError {
    explicit ExtractionError(const std::string& what) : DataError(what) {}
};

/// Multiset of keyphrases with a frequency index. Entries keep insertion order.
class KeyphraseSet {
public:
    void add(Keyphrase k);

    const std::vector<Keyphrase>& entries() const noexcept { return entries_; }
    std::size_t total() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t frequency(const std::string& text) const;
    const std::map<std::string, std::size_t>& frequencies() const noexcept { return freq_; }

    /// Distinct texts in first-occurrence order.
    const std::vector<std::string>& unique_texts() const noexcept { return unique_; }

    /// Entry indices sourced from one document, in insertion order.
    std::vector<std::size_t> entries_for_doc(const std::string& doc_id) const;
    std::vector<std::size_t> entries_for_chunk(const ChunkRef& ref) const;

    void write_jsonl(const std::filesystem::path& path) const;
    static KeyphraseSet read_jsonl(const std::filesystem::path& path);

private:
    std::vector<Keyphrase> entries_;
    std::map<std::string, std::size_t> freq_;
    std::vector<std::string> unique_;
    std::map<ChunkRef, std::vector<std::size_t>> by_chunk_;
};

struct ExtractionFailure {
    ChunkRef chunk;
    std::string error;
};

struct ExtractionReport {
    std::size_t chunks = 0;
    std::size_t keyphrases = 0;
    std::vector<ExtractionFailure> failures;
};

struct KeyphraseOptions {
    std::size_t max_in_flight = 8;
    double max_failure_fraction = 0.5;
};

/// One chunk: prompt, parse, tag provenance. Throws ExtractionError when the
/// response yields no usable phrase; gateway errors propagate.
std::vector<Keyphrase> extract_keyphrases(const Chunk& chunk, const ObjectiveDescription& objective,
                                          ModelGateway& gateway, const PromptSet& prompts);

/// Extracts from every chunk (concurrently) and assembles results in chunk
/// order. Aborts with DataError when more than half of the chunks fail.
KeyphraseSet build_keyphrase_set(const std::vector<Chunk>& chunks, const ObjectiveDescription& objective,
                                 ModelGateway& gateway, const PromptSet& prompts, ExtractionReport* report = nullptr,
                                 const KeyphraseOptions& options = {});

struct DominanceReport {
    std::size_t sampled = 0;
    std::size_t dominant = 0;
    double percent_dominant = 0.0;  // fraction in [0, 1]
    std::map<std::string, std::size_t> per_label_dominant_counts;
};

/// Matches a dominance-probe answer against a document's gold labels.
/// Exact normalized match first, then the longest gold label contained in the
/// answer. Empty when the answer names none (including "NO").
std::string match_dominant_label(std::string_view response, const std::vector<std::string>& gold_labels);

/// Asks the LLM which gold label (if any) covers more than half of each sampled document.
DominanceReport probe_dominance(const std::vector<Document>& docs, std::size_t sample, std::uint64_t seed,
                                ModelGateway& gateway, const PromptSet& prompts);

}  // namespace labelscout
