#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelscout/corpus.hpp"

namespace labelscout {

/// Knobs for the planted-label benchmark corpus.
struct SyntheticOptions {
    std::size_t documents = 200;
    std::size_t head_labels = 9;
    std::size_t longtail_labels = 3;
    std::size_t longtail_chunks = 18;  // chunks (and keyphrase occurrences) per long-tail label
    std::size_t noise_words = 6;       // rare topics, never labels
    std::size_t chunk_size = 50;
    std::size_t topic_repeats = 20;    // occurrences of the topic word per chunk
    std::uint64_t seed = 11;           // corpus layout
    std::uint64_t mock_seed = 0;       // seed of the mock embedder the run will use
    std::uint64_t subset_seed = 0;     // seed the run samples its discovery subset with
    std::size_t planted_prefix = 100;  // long-tail and noise documents land inside this subset prefix
};

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<std::string> head;
    std::vector<std::string> longtail;
    std::vector<std::string> noise;

    std::vector<std::string> planted() const;
    std::map<std::string, std::vector<std::string>> gold() const;
};

/// Builds a corpus whose chunks each start with, and repeat, one topic word.
/// Topic words are chosen so that under the mock backends (a) each chunk's
/// own label wins the entailment argmax, (b) long-tail words are less similar
/// to every other planted word than any noise word is to its nearest head
/// label, and (c) no two planted words fall in the dedup band. Throws
/// DataError if the word pool cannot satisfy this for the given seeds.
SyntheticCorpus generate_synthetic(const SyntheticOptions& options = {});

/// All-mock run config tuned for the synthetic corpus. Paths are written as
/// given (relative ones resolve against the config file's directory).
nlohmann::json synthetic_config(const std::string& corpus_path, const std::string& run_dir,
                                const SyntheticOptions& options = {});

}  // namespace labelscout
