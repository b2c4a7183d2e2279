#include "labelscout/keyphrase.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "labelscout/parallel.hpp"
#include "labelscout/text.hpp"

namespace labelscout {

using nlohmann::json;

std::string_view to_string(Granularity g) {
    switch (g) {
        case Granularity::coarse: return "coarse";
        case Granularity::fine: return "fine";
        case Granularity::unspecified: return "unspecified";
    }
    return "unspecified";
}

Granularity granularity_from_string(std::string_view s) {
    if (s == "coarse") return Granularity::coarse;
    if (s == "fine") return Granularity::fine;
    return Granularity::unspecified;
}

std::string ObjectiveDescription::render() const {
    if (demonstrations.empty()) return text;
    return text + " (for example: " + text::join(demonstrations, ", ") + ")";
}

namespace {

void erase_ci(std::string& s, std::string_view needle) {
    while (true) {
        const std::string lower = text::to_lower(s);
        const auto pos = lower.find(needle);
        if (pos == std::string::npos) return;
        s.erase(pos, needle.size());
    }
}

std::string strip_enumeration(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '#' || line[i] == ' ')) ++i;
    if (line.substr(i).starts_with("•")) i += 3;  // bullet
    std::size_t j = i;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')')) i = j + 1;
    return text::trim(line.substr(i));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : s) {
        if (c == ',' || c == ';') {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

std::vector<std::string> marker_segments(const std::string& line) {
    static constexpr std::string_view open = "[keyphrase]";
    static constexpr std::string_view close = "[/keyphrase]";
    const std::string lower = text::to_lower(line);
    std::vector<std::string> segments;
    std::size_t pos = lower.find(open);
    while (pos != std::string::npos) {
        const std::size_t start = pos + open.size();
        const std::size_t next_open = lower.find(open, start);
        const std::size_t next_close = lower.find(close, start);
        const std::size_t end = std::min({next_open, next_close, lower.size()});
        for (auto& part : split_list(std::string_view(line).substr(start, end - start))) segments.push_back(part);
        pos = next_open;
    }
    return segments;
}

std::string clean_segment(std::string seg) {
    erase_ci(seg, "[/keyphrase]");
    erase_ci(seg, "[keyphrase]");
    auto words = text::split(text::collapse_whitespace(seg), ' ');
    auto connective = [](const std::string& w) {
        const auto lw = text::normalize_phrase(w);
        return lw == "and" || lw == "or" || lw == "&";
    };
    while (!words.empty() && (words.front().empty() || connective(words.front()))) words.erase(words.begin());
    while (!words.empty() && (words.back().empty() || connective(words.back()))) words.pop_back();
    return text::normalize_phrase(text::join(words, " "));
}

}  // namespace

std::vector<ParsedPhrase> parse_keyphrase_response(std::string_view response) {
    std::vector<ParsedPhrase> out;
    std::set<std::string> seen;
    Granularity current = Granularity::unspecified;

    for (auto line : text::split(response, '\n')) {
        for (auto tag : {"[/inst]", "[inst]", "<s>", "</s>"}) erase_ci(line, tag);
        line = strip_enumeration(text::trim(line));
        if (line.empty()) continue;

        std::string lower = text::to_lower(line);
        const bool has_markers = lower.find("[keyphrase]") != std::string::npos;
        const auto colon = line.find(':');
        if ((lower.starts_with("coarse") || lower.starts_with("fine")) && colon != std::string::npos) {
            current = lower.starts_with("coarse") ? Granularity::coarse : Granularity::fine;
            line = line.substr(colon + 1);
        } else if (!has_markers && colon != std::string::npos) {
            // "Keyphrases: a, b" style header; a bare "Here are ...:" line yields nothing.
            if (text::tokenize(line.substr(0, colon)).size() <= 6) line = line.substr(colon + 1);
        }

        const auto segments = has_markers ? marker_segments(line) : split_list(line);
        for (const auto& seg : segments) {
            std::string phrase = clean_segment(seg);
            if (phrase.empty()) continue;
            if (text::tokenize(phrase).size() > kMaxPhraseTokens) continue;
            if (!seen.insert(phrase).second) continue;
            out.push_back({std::move(phrase), current});
        }
    }
    if (out.size() > kMaxPhrasesPerChunk) out.resize(kMaxPhrasesPerChunk);
    return out;
}

// ---------------------------------------------------------------------------

void KeyphraseSet::add(Keyphrase k) {
    if (k.text.empty()) throw DataError("keyphrase text must be non-empty");
    auto [it, inserted] = freq_.emplace(k.text, 0);
    ++it->second;
    if (inserted) unique_.push_back(k.text);
    by_chunk_[k.source].push_back(entries_.size());
    entries_.push_back(std::move(k));
}

std::size_t KeyphraseSet::frequency(const std::string& t) const {
    auto it = freq_.find(t);
    return it == freq_.end() ? 0 : it->second;
}

std::vector<std::size_t> KeyphraseSet::entries_for_doc(const std::string& doc_id) const {
    std::vector<std::size_t> out;
    for (auto it = by_chunk_.lower_bound(ChunkRef{doc_id, 0}); it != by_chunk_.end() && it->first.doc_id == doc_id;
         ++it) {
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> KeyphraseSet::entries_for_chunk(const ChunkRef& ref) const {
    auto it = by_chunk_.find(ref);
    return it == by_chunk_.end() ? std::vector<std::size_t>{} : it->second;
}

void KeyphraseSet::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& k : entries_) {
        out << json{{"doc_id", k.source.doc_id},
                    {"chunk", k.source.chunk_index},
                    {"text", k.text},
                    {"granularity", to_string(k.granularity)}}
                   .dump()
            << '\n';
    }
}

KeyphraseSet KeyphraseSet::read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read keyphrase file " + path.string());
    KeyphraseSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            set.add(Keyphrase{j.at("text").get<std::string>(),
                              ChunkRef{j.at("doc_id").get<std::string>(), j.at("chunk").get<std::size_t>()},
                              granularity_from_string(j.value("granularity", "unspecified"))});
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad keyphrase record: ") + e.what(), line_no);
        }
    }
    return set;
}

// ---------------------------------------------------------------------------

std::vector<Keyphrase> extract_keyphrases(const Chunk& chunk, const ObjectiveDescription& objective,
                                          ModelGateway& gateway, const PromptSet& prompts) {
    const auto req = prompts.keyphrase.render({{"objective", objective.render()}, {"chunk", chunk.text}});
    const std::string response = gateway.generate(req, Role::generator);
    auto parsed = parse_keyphrase_response(response);
    if (parsed.empty()) {
        throw ExtractionError("no keyphrase in response for " + chunk.doc_id + "#" + std::to_string(chunk.index));
    }
    std::vector<Keyphrase> out;
    out.reserve(parsed.size());
    for (auto& p : parsed) out.push_back({std::move(p.text), ChunkRef{chunk.doc_id, chunk.index}, p.granularity});
    return out;
}

KeyphraseSet build_keyphrase_set(const std::vector<Chunk>& chunks, const ObjectiveDescription& objective,
                                 ModelGateway& gateway, const PromptSet& prompts, ExtractionReport* report,
                                 const KeyphraseOptions& options) {
    if (text::trim(objective.text).empty()) throw ConfigError("objective description must be non-empty");
    std::vector<std::vector<Keyphrase>> results(chunks.size());
    std::vector<std::string> errors(chunks.size());
    parallel_for(chunks.size(), options.max_in_flight, [&](std::size_t i) {
        try {
            results[i] = extract_keyphrases(chunks[i], objective, gateway, prompts);
        } catch (const ExtractionError& e) {
            errors[i] = e.what();
        }
    });

    KeyphraseSet set;
    ExtractionReport local;
    local.chunks = chunks.size();
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!errors[i].empty()) {
            local.failures.push_back({ChunkRef{chunks[i].doc_id, chunks[i].index}, errors[i]});
            continue;
        }
        for (auto& k : results[i]) set.add(std::move(k));
    }
    local.keyphrases = set.total();
    if (!chunks.empty() &&
        static_cast<double>(local.failures.size()) > options.max_failure_fraction * static_cast<double>(chunks.size())) {
        throw DataError("keyphrase extraction failed for " + std::to_string(local.failures.size()) + " of " +
                        std::to_string(chunks.size()) + " chunks");
    }
    if (report) *report = std::move(local);
    return set;
}

// ---------------------------------------------------------------------------

std::string match_dominant_label(std::string_view response, const std::vector<std::string>& gold_labels) {
    const std::string answer = text::normalize_phrase(response);
    if (answer.empty() || answer == "no") return {};
    for (const auto& g : gold_labels) {
        if (text::normalize_phrase(g) == answer) return g;
    }
    const std::string padded = " " + text::collapse_whitespace(text::to_lower(std::string(response))) + " ";
    std::string best;
    std::size_t best_len = 0;
    for (const auto& g : gold_labels) {
        const std::string norm = text::normalize_phrase(g);
        if (norm.empty() || norm.size() <= best_len) continue;
        const auto pos = padded.find(norm);
        if (pos == std::string::npos) continue;
        const char before = padded[pos - 1];
        const char after = pos + norm.size() < padded.size() ? padded[pos + norm.size()] : ' ';
        if (std::isalnum(static_cast<unsigned char>(before)) || std::isalnum(static_cast<unsigned char>(after)))
            continue;
        best = g;
        best_len = norm.size();
    }
    return best;
}

DominanceReport probe_dominance(const std::vector<Document>& docs, std::size_t sample, std::uint64_t seed,
                                ModelGateway& gateway, const PromptSet& prompts) {
    std::vector<const Document*> labeled;
    for (const auto& d : docs) {
        if (!d.gold_labels.empty()) labeled.push_back(&d);
    }
    if (labeled.empty()) throw ConfigError("dominance probe requires documents with gold labels");

    const auto perm = seeded_permutation(labeled.size(), seed);
    const std::size_t n = std::min(sample, labeled.size());
    DominanceReport report;
    report.sampled = n;
    for (std::size_t i = 0; i < n; ++i) {
        const Document& doc = *labeled[perm[i]];
        std::string array = "[";
        for (std::size_t j = 0; j < doc.gold_labels.size(); ++j) {
            if (j) array += ", ";
            array += "'" + doc.gold_labels[j] + "'";
        }
        array += "]";
        const auto req = prompts.dominance.render({{"true_label_array", array}, {"document", doc.text}});
        const std::string label = match_dominant_label(gateway.generate(req, Role::generator), doc.gold_labels);
        if (label.empty()) continue;
        ++report.dominant;
        ++report.per_label_dominant_counts[label];
    }
    report.percent_dominant = n == 0 ? 0.0 : static_cast<double>(report.dominant) / static_cast<double>(n);
    return report;
}

}  // namespace labelscout
