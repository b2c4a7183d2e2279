#include "labelscout/prompts.hpp"

#include <fstream>
#include <sstream>

#include "labelscout/error.hpp"

namespace labelscout {

namespace {

constexpr const char* kLabelingSystem =
    "<s>[INST] <<SYS>>\n"
    "You are a helpful, respectful and honest assistant for labeling topics.\n"
    "<</SYS>>";

constexpr const char* kKeyphraseUser =
    "The following is a text chunk from the corpus.\n"
    "\"\"\"\n"
    "{chunk}\n"
    "\"\"\"\n"
    "Based on the topic information mentioned above, the coarse-grained keyphrases are formatted as "
    "{objective}, while the fine-grained keyphrases are formatted as {objective}.\n"
    "[INST]\n"
    "Based on the information about the topic above, please find two coarse-grained and two "
    "fine-grained keyphrases for the example.\n"
    "Please only return the keyphrases in one line using the format below:\n"
    "[/INST] [keyphrase] and [/keyphrase].";

constexpr const char* kSynthesisUser =
    "The classification objective is: {objective}\n"
    "\"\"\"\n"
    "{document}\n"
    "\"\"\"\n"
    "[INST]\n"
    "Please find one label for this document. Only return the label, in at most six words.\n"
    "[/INST]";

constexpr const char* kDedupJudgeSystem =
    "You are an expert in text classification, with specialized skills in discerning matching pairs for labels.";

constexpr const char* kDedupJudgeUser =
    "Do label pairs have similar meanings in the text classification problem? "
    "Consider the labels '{label_a}' and '{label_b}'.\n"
    "Please respond with Yes or No.";

constexpr const char* kMatchJudgeUser =
    "Given that we have established matching pairs such as\n"
    "\"'Machine learning' and 'artificial intelligence'\",\n"
    "\"'Computational Geometry' and 'Algebraic Geometry'\",\n"
    "\"'Physics and Society' and 'Physics'\",\n"
    "\"'teether' and 'baby_dental_care'\",\n"
    "when using util.dot_score to measure semantic similarity between tokens, would you consider "
    "{ground_truth} and {prediction} as a matching pair in a text classification problem?\n"
    "\n"
    "Please respond with Yes or No.";

constexpr const char* kDominanceSystem =
    "You are a poetic assistant, skilled in explaining complex programming concepts with creative flair.";

constexpr const char* kDominanceUser =
    "Which label in the label space {true_label_array} is the dominant label that covers more than 50% "
    "of the content of the following document?\n"
    "\"\"\"\n"
    "{document}\n"
    "\"\"\"\n"
    "Please output the dominant label only if exist or output 'NO' if there are no dominant labels.";

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string substitute(std::string s, const std::map<std::string, std::string>& values) {
    // Single left-to-right pass so substituted text is never re-expanded.
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        if (s[pos] == '{') {
            const auto close = s.find('}', pos + 1);
            if (close != std::string::npos) {
                const auto it = values.find(s.substr(pos + 1, close - pos - 1));
                if (it != values.end()) {
                    out += it->second;
                    pos = close + 1;
                    continue;
                }
            }
        }
        out.push_back(s[pos++]);
    }
    return out;
}

}  // namespace

GenerationRequest PromptTemplate::render(const std::map<std::string, std::string>& values, int max_tokens) const {
    GenerationRequest req;
    req.system_prompt = substitute(system, values);
    req.user_prompt = substitute(user, values);
    req.max_tokens = max_tokens;
    return req;
}

PromptSet PromptSet::defaults() {
    PromptSet set;
    set.keyphrase = {kLabelingSystem, kKeyphraseUser};
    set.synthesis = {kLabelingSystem, kSynthesisUser};
    set.dedup_judge = {kDedupJudgeSystem, kDedupJudgeUser};
    set.match_judge = {kDedupJudgeSystem, kMatchJudgeUser};
    set.dominance = {kDominanceSystem, kDominanceUser};
    return set;
}

PromptTemplate parse_template_file(const std::string& content) {
    std::string normalized = content;
    replace_all(normalized, "\r\n", "\n");
    const std::string sep = "\n---\n";
    const auto pos = normalized.find(sep);
    if (pos == std::string::npos) throw ConfigError("prompt template lacks a '---' separator line");
    PromptTemplate t;
    t.system = normalized.substr(0, pos);
    t.user = normalized.substr(pos + sep.size());
    while (!t.user.empty() && t.user.back() == '\n') t.user.pop_back();
    return t;
}

std::string format_template_file(const PromptTemplate& t) { return t.system + "\n---\n" + t.user + "\n"; }

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet set = defaults();
    const std::pair<const char*, PromptTemplate*> slots[] = {{"keyphrase", &set.keyphrase},
                                                             {"synthesis", &set.synthesis},
                                                             {"dedup_judge", &set.dedup_judge},
                                                             {"match_judge", &set.match_judge},
                                                             {"dominance", &set.dominance}};
    for (const auto& [name, slot] : slots) {
        const auto path = dir / (std::string(name) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) continue;
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            *slot = parse_template_file(buf.str());
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return set;
}

}  // namespace labelscout
