#include "labelscout/similarity.hpp"

#include "labelscout/text.hpp"

namespace labelscout {

const EmbeddingVector& EmbeddingSimilarity::vector_for(const std::string& text) {
    {
        std::lock_guard lock(mu_);
        auto it = memo_.find(text);
        if (it != memo_.end()) return it->second;
    }
    EmbeddingVector v = gateway_.embed_one(text, role_);
    std::lock_guard lock(mu_);
    return memo_.emplace(text, std::move(v)).first->second;
}

double EmbeddingSimilarity::similarity(const std::string& a, const std::string& b) {
    if (a == b) return 1.0;
    return cosine(vector_for(a), vector_for(b));
}

void EmbeddingSimilarity::prepare(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mu_);
        for (const auto& t : texts) {
            if (!memo_.contains(t)) missing.push_back(t);
        }
    }
    if (missing.empty()) return;
    auto vectors = gateway_.embed(missing, role_);
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < missing.size(); ++i) memo_.emplace(missing[i], std::move(vectors[i]));
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::yes: return "yes";
        case Verdict::no: return "no";
        case Verdict::unparseable: return "unparseable";
    }
    return "unparseable";
}

Verdict parse_yes_no(std::string_view response) {
    bool yes = false;
    bool no = false;
    bool first = true;
    for (const auto& tok : text::tokenize(response)) {
        if (!text::is_word_token(tok)) continue;
        const std::string w = text::to_lower(tok);
        if (first) {
            if (w == "yes") return Verdict::yes;
            if (w == "no") return Verdict::no;
            first = false;
        }
        yes |= w == "yes";
        no |= w == "no";
    }
    if (yes == no) return Verdict::unparseable;
    return yes ? Verdict::yes : Verdict::no;
}

LlmJudge::LlmJudge(ModelGateway& gateway, PromptTemplate tmpl, std::string slot_a, std::string slot_b, bool quote)
    : gateway_(gateway), tmpl_(std::move(tmpl)), slot_a_(std::move(slot_a)), slot_b_(std::move(slot_b)), quote_(quote) {}

LlmJudge LlmJudge::for_dedup(ModelGateway& gateway, const PromptSet& prompts) {
    return LlmJudge(gateway, prompts.dedup_judge, "label_a", "label_b");
}

LlmJudge LlmJudge::for_matching(ModelGateway& gateway, const PromptSet& prompts) {
    return LlmJudge(gateway, prompts.match_judge, "ground_truth", "prediction", true);
}

Verdict LlmJudge::judge(const std::string& a, const std::string& b) {
    auto wrap = [&](const std::string& s) { return quote_ ? "'" + s + "'" : s; };
    const auto req = tmpl_.render({{slot_a_, wrap(a)}, {slot_b_, wrap(b)}}, 8);
    ++calls_;
    return parse_yes_no(gateway_.generate(req, Role::judge));
}

}  // namespace labelscout
