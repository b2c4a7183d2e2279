#include <doctest.h>

#include <fstream>

#include "labelscout/keyphrase.hpp"
#include "labelscout/prompts.hpp"
#include "support.hpp"

using namespace labelscout;

namespace {

std::vector<std::string> texts(const std::vector<ParsedPhrase>& p) {
    std::vector<std::string> out;
    for (const auto& x : p) out.push_back(x.text);
    return out;
}

}  // namespace

TEST_CASE("keyphrase responses in the accepted shapes") {
    CHECK(texts(parse_keyphrase_response("[keyphrase] Quantum Computing [/keyphrase] [keyphrase]qubits[/keyphrase]")) ==
          std::vector<std::string>{"quantum computing", "qubits"});
    CHECK(texts(parse_keyphrase_response("chess, openings; endgames\ntactics")) ==
          std::vector<std::string>{"chess", "openings", "endgames", "tactics"});
    CHECK(texts(parse_keyphrase_response("1. Baking\n2. Bread\n3. baking")) ==
          std::vector<std::string>{"baking", "bread"});
    CHECK(parse_keyphrase_response("a, b, c, d, e, f").size() == kMaxPhrasesPerChunk);
    CHECK(parse_keyphrase_response("one two three four five six seven eight nine ten eleven").empty());
    CHECK(parse_keyphrase_response("").empty());

    const auto tagged = parse_keyphrase_response("Coarse keyphrases: science\nFine keyphrases: optics, lasers");
    REQUIRE(tagged.size() == 3);
    CHECK(tagged[0].text == "science");
    CHECK(tagged[0].granularity == Granularity::coarse);
    CHECK(tagged[2].granularity == Granularity::fine);
}

TEST_CASE("keyphrase set counts and round-trips") {
    KeyphraseSet k;
    k.add({"chess", {"a", 0}, Granularity::unspecified});
    k.add({"opera", {"a", 1}, Granularity::fine});
    k.add({"chess", {"b", 0}, Granularity::coarse});
    CHECK(k.total() == 3);
    CHECK(k.frequency("chess") == 2);
    CHECK(k.frequency("poker") == 0);
    CHECK(k.unique_texts() == std::vector<std::string>{"chess", "opera"});
    CHECK(k.entries_for_doc("a") == std::vector<std::size_t>{0, 1});
    CHECK(k.entries_for_chunk({"b", 0}) == std::vector<std::size_t>{2});

    testing::TempDir dir;
    k.write_jsonl(dir / "k.jsonl");
    const auto back = KeyphraseSet::read_jsonl(dir / "k.jsonl");
    REQUIRE(back.total() == 3);
    CHECK(back.entries()[1].granularity == Granularity::fine);
    CHECK(back.entries()[2].source == ChunkRef{"b", 0});
}

TEST_CASE("extraction over chunks keeps chunk order and tolerates some failures") {
    auto gen = std::make_shared<mock::Generator>(
        0, std::vector<mock::Fixture>{{std::nullopt, {"alpha"}, "[keyphrase]alpha[/keyphrase]"},
                                      {std::nullopt, {"beta"}, "beta, gamma"},
                                      {std::nullopt, {"zzz"}, "??"}});
    auto gw = testing::mock_gateway(0, gen);
    const auto prompts = PromptSet::defaults();
    const ObjectiveDescription objective{"Tag topics.", {}};
    const std::vector<Chunk> chunks{{"d1", 0, "alpha text", 2}, {"d1", 1, "zzz", 1}, {"d2", 0, "beta text", 2}};
    ExtractionReport report;
    const auto k = build_keyphrase_set(chunks, objective, *gw, prompts, &report);
    CHECK(report.chunks == 3);
    CHECK(report.failures.size() == 1);
    CHECK(report.failures[0].chunk == ChunkRef{"d1", 1});
    REQUIRE(k.total() == 3);
    CHECK(k.entries()[0].text == "alpha");
    CHECK(k.entries()[1].source == ChunkRef{"d2", 0});

    const std::vector<Chunk> mostly_bad{{"x", 0, "zzz", 1}, {"x", 1, "zzz zzz", 2}, {"y", 0, "alpha", 1}};
    CHECK_THROWS_AS(build_keyphrase_set(mostly_bad, objective, *gw, prompts), DataError);
}

TEST_CASE("dominance answers are matched against gold labels") {
    const std::vector<std::string> gold{"Health Care", "Care", "Sports"};
    CHECK(match_dominant_label("health care", gold) == "Health Care");
    CHECK(match_dominant_label("The answer is Health Care.", gold) == "Health Care");
    CHECK(match_dominant_label("mostly about sports", gold) == "Sports");
    CHECK(match_dominant_label("NO", gold).empty());
    CHECK(match_dominant_label("sportswear", gold).empty());
    CHECK(match_dominant_label("", gold).empty());
}

TEST_CASE("dominance probe counts documents") {
    auto gen = std::make_shared<mock::Generator>(
        0, std::vector<mock::Fixture>{{std::nullopt, {"first"}, "Chess"}, {std::nullopt, {"second"}, "NO"}});
    auto gw = testing::mock_gateway(0, gen);
    const std::vector<Document> docs{{"a", "first doc about chess", {"Chess", "Games"}, Split::train},
                                     {"b", "second doc", {"Opera"}, Split::train},
                                     {"c", "unlabeled", {}, Split::train}};
    const auto r = probe_dominance(docs, 10, 0, *gw, PromptSet::defaults());
    CHECK(r.sampled == 2);
    CHECK(r.dominant == 1);
    CHECK(r.percent_dominant == 0.5);
    CHECK(r.per_label_dominant_counts.at("Chess") == 1);
}

TEST_CASE("prompt templates") {
    const auto d = PromptSet::defaults();
    const auto req = d.dedup_judge.render({{"label_a", "chess"}, {"label_b", "checkers"}}, 4);
    CHECK(req.user_prompt.find("chess") != std::string::npos);
    CHECK(req.user_prompt.find("{label_a}") == std::string::npos);
    CHECK(req.max_tokens == 4);
    CHECK(PromptTemplate{"s {x}", "{x} {y}"}.render({{"x", "1"}}).user_prompt == "1 {y}");

    const auto t = parse_template_file(format_template_file(d.synthesis));
    CHECK(t.system == d.synthesis.system);
    CHECK(t.user == d.synthesis.user);
    CHECK_THROWS_AS(parse_template_file("no separator"), Error);

    testing::TempDir dir;
    std::ofstream(dir / "match_judge.txt") << "judge system\n---\nIs {prediction} {ground_truth}?\n";
    const auto loaded = PromptSet::load(dir.path());
    CHECK(loaded.match_judge.system == "judge system");
    CHECK(loaded.keyphrase.user == d.keyphrase.user);
}

TEST_CASE("shipped template files equal the built-in defaults") {
    const std::filesystem::path dir = std::filesystem::path(LABELSCOUT_SOURCE_DIR) / "templates";
    const auto d = PromptSet::defaults();
    const auto loaded = PromptSet::load(dir);
    const std::pair<const PromptTemplate*, const PromptTemplate*> pairs[] = {
        {&d.keyphrase, &loaded.keyphrase}, {&d.synthesis, &loaded.synthesis}, {&d.dedup_judge, &loaded.dedup_judge},
        {&d.match_judge, &loaded.match_judge}, {&d.dominance, &loaded.dominance}};
    for (const auto& [want, got] : pairs) {
        CHECK(got->system == want->system);
        CHECK(got->user == want->user);
    }
    for (const char* name : {"keyphrase", "synthesis", "dedup_judge", "match_judge", "dominance"})
        CHECK(std::filesystem::exists(dir / (std::string(name) + ".txt")));
}
