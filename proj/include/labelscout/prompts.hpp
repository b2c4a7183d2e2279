#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "labelscout/gateway.hpp"

namespace labelscout {

/// A system/user prompt pair with `{name}` placeholders.
struct PromptTemplate {
    std::string system;
    std::string user;

    /// Substitutes every `{key}` present in `values`; other braces are left alone.
    GenerationRequest render(const std::map<std::string, std::string>& values, int max_tokens = 256) const;
};

/// Every prompt the pipeline issues. Defaults are built in; any of them can
/// be replaced by a text file in a template directory.
///
/// Template file format: the system prompt, a line containing only `---`,
/// then the user prompt.
struct PromptSet {
    PromptTemplate keyphrase;    // {objective} {chunk}
    PromptTemplate synthesis;    // {objective} {document}
    PromptTemplate dedup_judge;  // {label_a} {label_b}
    PromptTemplate match_judge;  // {ground_truth} {prediction}
    PromptTemplate dominance;    // {true_label_array} {document}

    static PromptSet defaults();

    /// Defaults overridden by `<dir>/<name>.txt` for each file present
    /// (keyphrase, synthesis, dedup_judge, match_judge, dominance).
    static PromptSet load(const std::filesystem::path& dir);
};

PromptTemplate parse_template_file(const std::string& content);
std::string format_template_file(const PromptTemplate& t);

inline constexpr const char* kDefaultHypothesis = "This example is constructed for {label}";

}  // namespace labelscout
