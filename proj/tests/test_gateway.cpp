#include <doctest.h>

#include <chrono>
#include <thread>

#include "labelscout/digest.hpp"
#include "support.hpp"

using namespace labelscout;

namespace {

/// Generator that counts calls and can be slowed down.
class CountingGenerator : public TextGenerator {
public:
    explicit CountingGenerator(std::chrono::milliseconds delay = {}) : delay_(delay) {}
    std::string id() const override { return "counting"; }
    std::string generate(const GenerationRequest& req) override {
        ++calls;
        last_temperature = req.temperature;
        std::this_thread::sleep_for(delay_);
        return "answer to " + req.user_prompt;
    }
    std::atomic<int> calls{0};
    std::atomic<double> last_temperature{-1.0};

private:
    std::chrono::milliseconds delay_;
};

class FailingGenerator : public TextGenerator {
public:
    std::string id() const override { return "failing"; }
    std::string generate(const GenerationRequest&) override { throw GatewayError("down", 503); }
};

GatewayRoles roles_with(std::shared_ptr<TextGenerator> gen) {
    GatewayRoles r;
    r.generator = std::move(gen);
    r.embedder = std::make_shared<mock::Embedder>(0);
    r.nli = std::make_shared<mock::Entailment>(0);
    return r;
}

}  // namespace

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest_prefix64(sha256("abc")) == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("cache keys are canonical") {
    GenerationRequest a{"sys", "hello   world", 64, 0.0};
    GenerationRequest b{"sys", "hello world", 64, 0.0};
    CHECK(request_digest(a) == request_digest(b));
    b.max_tokens = 65;
    CHECK(request_digest(a) != request_digest(b));
    CHECK(make_key("x", a).digest != make_key("y", a).digest);
    CHECK(make_key("x", std::string_view("t")).capability == Capability::embed);
    CHECK(make_key("x", EntailmentQuery{"p", "h"}).digest != make_key("x", EntailmentQuery{"h", "p"}).digest);
}

TEST_CASE("responses persist and a warm gateway makes no backend calls") {
    testing::TempDir dir;
    const GenerationRequest req{"sys", "question", 32, 0.7};
    std::string first;
    {
        auto gen = std::make_shared<CountingGenerator>();
        ModelGateway gw(roles_with(gen), std::make_shared<ResponseCache>(dir / "cache"));
        first = gw.generate(req);
        CHECK(gw.generate(req) == first);
        CHECK(gen->calls == 1);
        CHECK(gen->last_temperature == 0.0);  // deterministic mode
        const std::vector<std::string> texts{"alpha", "beta", "alpha"};
        gw.embed(texts);
        gw.entail({"chess openings", "This example is constructed for chess"});
        const auto c = gw.counters();
        CHECK(c.generate.backend_calls == 1);
        CHECK(c.generate.cache_hits == 1);
        CHECK(c.embed.backend_calls == 1);  // one batch for the two distinct texts
        CHECK(c.entail.backend_calls == 1);
    }
    auto gen = std::make_shared<CountingGenerator>();
    ModelGateway warm(roles_with(gen), std::make_shared<ResponseCache>(dir / "cache"));
    CHECK(warm.generate(req) == first);
    const std::vector<std::string> texts{"beta", "alpha"};
    const auto v = warm.embed(texts);
    CHECK(v[1].values == mock::embedding("alpha", 0).values);
    CHECK(warm.entail({"chess openings", "This example is constructed for chess"}) ==
          mock::entailment("chess openings", "This example is constructed for chess", 0));
    CHECK(gen->calls == 0);
    CHECK(warm.counters().backend_calls() == 0);
    CHECK(warm.counters().cache_hits() == 4);

    CHECK(warm.flush_cache(CacheScope::generate) == 1);
    warm.generate(req);
    CHECK(gen->calls == 1);
    CHECK(warm.cache().size(Capability::embed) == 2);
}

TEST_CASE("identical concurrent requests are coalesced") {
    auto gen = std::make_shared<CountingGenerator>(std::chrono::milliseconds(100));
    ModelGateway gw(roles_with(gen), std::make_shared<ResponseCache>());
    std::vector<std::thread> threads;
    std::vector<std::string> out(6);
    for (int i = 0; i < 6; ++i)
        threads.emplace_back([&, i] { out[i] = gw.generate({"s", "same", 8, 0.0}); });
    for (auto& t : threads) t.join();
    CHECK(gen->calls == 1);
    for (const auto& o : out) CHECK(o == "answer to same");
}

TEST_CASE("backend failures propagate and are not cached") {
    ModelGateway gw(roles_with(std::make_shared<FailingGenerator>()), std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(gw.generate({"s", "x", 8, 0.0}), GatewayError);
    CHECK(gw.cache().size() == 0);
    CHECK_THROWS_AS(gw.generate({"s", "x", 8, 0.0}), GatewayError);
}

TEST_CASE("mock backends are pure functions of their inputs") {
    CHECK(mock::embedding("Chess openings!", 3).values == mock::embedding("chess openings", 3).values);
    CHECK(mock::embedding("chess", 3).values != mock::embedding("chess", 4).values);
    CHECK(cosine(mock::embedding("chess", 0), mock::embedding("chess", 0)) == doctest::Approx(1.0));
    CHECK(std::abs(cosine(mock::embedding("chess", 0), mock::embedding("opera", 0))) < 0.5);
    const double e = mock::entailment("chess openings chess", "This example is constructed for chess", 0);
    CHECK(e > mock::entailment("chess openings chess", "This example is constructed for opera", 0));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    CHECK(mock::first_noun_like("Summarize: \"\"\"the chess club\"\"\"") == "chess");

    mock::Generator gen(0, {{std::nullopt, {"baking"}, "Baking"}});
    CHECK(gen.generate({"", "notes on baking bread", 8, 0.0}) == "Baking");
    CHECK(gen.generate({"", "\"\"\"the opera house\"\"\"", 8, 0.0}) == "opera");
    const auto before = gen.id();
    gen.add_exact({"", "exact", 8, 0.0}, "pinned");
    CHECK(gen.id() != before);
    CHECK(gen.generate({"", "exact", 8, 0.0}) == "pinned");
}
