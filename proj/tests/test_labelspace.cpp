#include <doctest.h>

#include <fstream>
#include <random>

#include "labelscout/labelspace.hpp"
#include "support.hpp"

using namespace labelscout;

TEST_CASE("label lifecycle bumps the version once per mutation") {
    LabelSpace s;
    CHECK(s.version() == 0);
    const auto a = s.add("  Machine Learning ", Provenance::cluster_synthesis, {"e1", "e2", "e3", "e4"});
    CHECK(s.version() == 1);
    CHECK(s.label(a).name == "machine learning");
    CHECK(s.label(a).evidence.size() == 3);
    CHECK(s.label(a).created_at_version == 1);
    const auto b = s.add("robotics", Provenance::refine_promotion);
    CHECK_THROWS_AS(s.add("MACHINE learning", Provenance::human_edit), CollisionError);
    CHECK_THROWS_AS(s.add("   ", Provenance::human_edit), DataError);
    CHECK(s.version() == 2);

    s.freeze({a, a});
    CHECK(s.label(a).status == LabelStatus::frozen);
    CHECK(s.version() == 3);
    s.freeze({a});  // nothing changes
    CHECK(s.version() == 3);
    CHECK_THROWS_AS(s.remove(a), StateError);
    s.remove(b);
    CHECK_THROWS_AS(s.remove(b), StateError);
    CHECK_THROWS_AS(s.freeze({b}), StateError);
    CHECK_THROWS_AS(s.rename(b, "x"), StateError);
    // A removed name is free again.
    const auto c = s.add("robotics", Provenance::human_edit);
    CHECK(c != b);
    s.unfreeze_all();
    CHECK(s.label(a).status == LabelStatus::active);
    s.rename(a, "ML");
    CHECK(s.find_live("ml") != nullptr);
    CHECK_THROWS_AS(s.rename(a, "robotics"), CollisionError);
    CHECK(s.live_ids() == std::vector<LabelId>{a, c});
    CHECK(s.count(LabelStatus::removed) == 1);
    CHECK(s.export_names() == "ml\nrobotics\n");
}

TEST_CASE("replaying the mutation log reproduces the state") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        LabelSpace s;
        for (int step = 0; step < 40; ++step) {
            const auto live = s.live_ids();
            try {
                switch (rng() % 6) {
                    case 0:
                    case 1: s.add("label " + std::to_string(rng() % 30), Provenance::cluster_synthesis); break;
                    case 2:
                        if (!live.empty()) s.remove(live[rng() % live.size()]);
                        break;
                    case 3:
                        if (!live.empty()) s.freeze({live[rng() % live.size()]});
                        break;
                    case 4:
                        if (live.size() >= 2) s.add_pair(live[0], live[1], 0.6);
                        break;
                    case 5: s.unfreeze_all(); break;
                }
            } catch (const StateError&) {
            }
        }
        const auto again = LabelSpace::replay(s.log());
        CHECK(again.same_state(s));
        CHECK(LabelSpace::from_json(s.to_json()).to_json() == s.to_json());
    }
}

TEST_CASE("persisted spaces are validated on load") {
    testing::TempDir dir;
    LabelSpace s;
    const auto a = s.add("chess", Provenance::cluster_synthesis);
    const auto b = s.add("checkers", Provenance::cluster_synthesis);
    s.add_pair(a, b, 0.6, "no");
    s.save(dir / "space.json");
    CHECK(LabelSpace::load(dir / "space.json").same_state(s));

    auto j = s.to_json();
    j["labels"][0]["name"] = "tampered";
    std::ofstream(dir / "bad.json") << j.dump();
    CHECK_THROWS_AS(LabelSpace::load(dir / "bad.json"), DataError);
    std::ofstream(dir / "junk.json") << "{not json";
    CHECK_THROWS_AS(LabelSpace::load(dir / "junk.json"), DataError);
}

TEST_CASE("pair resolution") {
    LabelSpace s;
    const auto a = s.add("health care", Provenance::cluster_synthesis);
    const auto b = s.add("health personal care", Provenance::cluster_synthesis);
    const auto p = s.add_pair(a, b, 0.62);
    const auto q = s.add_pair(a, b, 0.62);
    CHECK(s.has_pair(b, a));

    CHECK_THROWS_AS(s.resolve(p, Resolution::rename), ConfigError);
    CHECK_THROWS_AS(s.resolve(p, Resolution::rename, 99, "x"), Error);
    const auto before = s.version();
    s.resolve(p, Resolution::remove_b);
    CHECK(s.version() == before + 1);
    CHECK(s.label(b).status == LabelStatus::removed);
    CHECK(s.pair(p).status == PairStatus::resolved);
    CHECK_THROWS_AS(s.resolve(p, Resolution::keep_both), StateError);
    CHECK_THROWS_AS(s.resolve(q, Resolution::remove_b), StateError);  // already removed
    s.resolve(q, Resolution::rename, a, "healthcare");
    CHECK(s.label(a).name == "healthcare");
}

TEST_CASE("synthesized label responses are normalized") {
    CHECK(normalize_label_response("Label: Quantum Computing.") == "quantum computing");
    CHECK(normalize_label_response("\n\n  \"Sports & Leisure\"\nexplanation") == "sports & leisure");
    CHECK(normalize_label_response("**Climate-change**") == "climate-change");
    CHECK(normalize_label_response("one two three four five six") == "one two three four five six");
    CHECK(normalize_label_response("one two three four five six seven").empty());
    CHECK(normalize_label_response("...").empty());
    CHECK(normalize_label_response("").empty());
}

TEST_CASE("synthesize_label retries unusable answers and reports duplicates") {
    auto gen = std::make_shared<mock::Generator>(0, std::vector<mock::Fixture>{}, std::string("???"));
    auto gw = testing::mock_gateway(0, gen);
    const auto prompts = PromptSet::defaults();
    LabelSpace s;
    const std::vector<Chunk> ex{{"d", 0, "chess openings", 2}};

    auto r = synthesize_label(s, 0, ex, "topics", *gw, prompts);
    CHECK_FALSE(r.label);
    CHECK(r.attempts == 3);
    CHECK(s.live().empty());

    gen->set_default("Chess");
    r = synthesize_label(s, 1, ex, "topics", *gw, prompts);
    REQUIRE(r.label);
    CHECK(s.label(*r.label).name == "chess");
    CHECK(s.label(*r.label).evidence == std::vector<std::string>{"chess openings"});
    r = synthesize_label(s, 2, ex, "topics", *gw, prompts);
    CHECK_FALSE(r.label);
    CHECK(r.name == "chess");
    CHECK_FALSE(r.error.empty());

    CHECK_THROWS_AS(synthesize_label(s, 3, {}, "topics", *gw, prompts), ConfigError);
}

TEST_CASE("dedup removes near-duplicates and queues the band") {
    LabelSpace s;
    const auto hc = s.add("health care", Provenance::cluster_synthesis);
    const auto hpc = s.add("health personal care", Provenance::cluster_synthesis);
    const auto med = s.add("medicine", Provenance::cluster_synthesis);
    const auto med2 = s.add("medical", Provenance::cluster_synthesis);
    const auto sport = s.add("sport", Provenance::cluster_synthesis);
    testing::TableSimilarity sim;
    sim.set("health care", "health personal care", 0.62);
    sim.set("medicine", "medical", 0.9);
    sim.set("health care", "medicine", 0.49);

    SUBCASE("without a judge the band pair stays pending") {
        const auto r = deduplicate(s, sim, nullptr);
        CHECK(r.removed == std::vector<LabelId>{med2});
        REQUIRE(r.pairs.size() == 1);
        const auto& p = s.pair(r.pairs[0]);
        CHECK(p.label_a == hc);
        CHECK(p.label_b == hpc);
        CHECK(p.status == PairStatus::pending);
        CHECK_FALSE(p.judge_opinion);
        // A second pass does not queue the same pair again.
        CHECK(deduplicate(s, sim, nullptr).pairs.empty());
    }
    SUBCASE("judge yes removes the later label, no keeps both") {
        testing::TableJudge judge;
        judge.set("health care", "health personal care", Verdict::yes);
        auto r = deduplicate(s, sim, &judge);
        CHECK(r.judge_calls == 1);
        CHECK(s.label(hpc).status == LabelStatus::removed);
        CHECK(s.pair(r.pairs[0]).judge_opinion == std::optional<std::string>("yes"));
        CHECK(s.pair(r.pairs[0]).resolution == std::optional<Resolution>(Resolution::remove_b));
    }
    SUBCASE("judge no resolves keep_both") {
        testing::TableJudge judge;
        judge.set("health care", "health personal care", Verdict::no);
        auto r = deduplicate(s, sim, &judge);
        CHECK(s.label(hpc).live());
        CHECK(s.pair(r.pairs[0]).resolution == std::optional<Resolution>(Resolution::keep_both));
    }
    SUBCASE("auto judge off leaves the pair for review") {
        testing::TableJudge judge;
        DedupOptions opt;
        opt.auto_judge = false;
        auto r = deduplicate(s, sim, &judge, opt);
        CHECK(judge.calls() == 0);
        CHECK(s.pair(r.pairs[0]).status == PairStatus::pending);
    }
    SUBCASE("a frozen later label shields itself; the earlier one goes") {
        s.freeze({med2});
        const auto r = deduplicate(s, sim, nullptr);
        CHECK(r.removed == std::vector<LabelId>{med});
    }
    CHECK(s.label(sport).live());
}
