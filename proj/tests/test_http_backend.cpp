#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "labelscout/http_backend.hpp"
#include "support.hpp"

using namespace labelscout;
using nlohmann::json;

namespace {

/// Local OpenAI-style stub. Fails the first `fail_first` requests with 503.
class Stub {
public:
    Stub() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            if (flaky(res)) return;
            auth = req.get_header_value("Authorization");
            const auto body = json::parse(req.body);
            last_request = body;
            const std::string user = body.at("messages").at(1).at("content");
            const std::string finish = user == "truncate me" ? "length" : "stop";
            res.set_content(json{{"choices", json::array({{{"message", {{"content", "echo: " + user}}},
                                                          {"finish_reason", finish}}})}}
                                .dump(),
                            "application/json");
        });
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            if (flaky(res)) return;
            const auto input = json::parse(req.body).at("input");
            json data = json::array();
            // Reverse order with explicit indices.
            for (std::size_t i = input.size(); i-- > 0;)
                data.push_back({{"index", i}, {"embedding", {double(i), double(input[i].get<std::string>().size())}}});
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        server_.Post("/nli", [this](const httplib::Request& req, httplib::Response& res) {
            if (flaky(res)) return;
            const auto body = json::parse(req.body);
            const double p = body.at("hypothesis") == "bad" ? 1.5 : 0.25;
            res.set_content(json{{"entailment", p}}.dump(), "application/json");
        });
        server_.Post("/v1/forbidden/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
            ++requests;
            res.status = 403;
            res.set_content("no", "text/plain");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Stub() {
        server_.stop();
        thread_.join();
    }

    http::Endpoint endpoint(const std::string& path = "/v1") const {
        http::Endpoint e;
        e.base_url = "http://127.0.0.1:" + std::to_string(port_) + path;
        e.model = "stub-model";
        e.backoff = std::chrono::milliseconds(1);
        e.timeout_seconds = 5;
        return e;
    }

    std::atomic<int> fail_first{0};
    std::atomic<int> requests{0};
    std::string auth;
    json last_request;

private:
    bool flaky(httplib::Response& res) {
        if (requests++ < fail_first) {
            res.status = 503;
            return true;
        }
        return false;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace

TEST_CASE("chat generator speaks the chat-completions shape") {
    Stub stub;
    setenv("LABELSCOUT_TEST_KEY", "k-123", 1);
    auto e = stub.endpoint();
    e.api_key_env = "LABELSCOUT_TEST_KEY";
    http::ChatGenerator gen(e);
    CHECK(gen.generate({"sys", "hello", 12, 0.0}) == "echo: hello");
    CHECK(stub.auth == "Bearer k-123");
    CHECK(stub.last_request.at("model") == "stub-model");
    CHECK(stub.last_request.at("max_tokens") == 12);
    CHECK(stub.last_request.at("messages").at(0).at("content") == "sys");
    CHECK_THROWS_AS(gen.generate({"sys", "truncate me", 12, 0.0}), TruncatedResponseError);
    unsetenv("LABELSCOUT_TEST_KEY");
    gen.generate({"sys", "again", 12, 0.0});
    CHECK(stub.auth.empty());
}

TEST_CASE("server errors are retried, client errors are not") {
    Stub stub;
    stub.fail_first = 2;
    http::ChatGenerator gen(stub.endpoint());
    CHECK(gen.generate({"", "x", 8, 0.0}) == "echo: x");
    CHECK(stub.requests == 3);

    stub.requests = 0;
    stub.fail_first = 10;
    try {
        gen.generate({"", "y", 8, 0.0});
        FAIL("expected a gateway error");
    } catch (const GatewayError& err) {
        CHECK(err.status == 503);
    }
    CHECK(stub.requests == 3);

    stub.requests = 0;
    stub.fail_first = 0;
    http::ChatGenerator forbidden(stub.endpoint("/v1/forbidden"));
    try {
        forbidden.generate({"", "z", 8, 0.0});
        FAIL("expected a gateway error");
    } catch (const GatewayError& err) {
        CHECK(err.status == 403);
    }
    CHECK(stub.requests == 1);
}

TEST_CASE("embedding client reorders by index") {
    Stub stub;
    http::EmbeddingClient emb(stub.endpoint());
    const std::vector<std::string> texts{"a", "bbb", "cc"};
    const auto v = emb.embed(texts);
    REQUIRE(v.size() == 3);
    CHECK(v[0].values == std::vector<double>{0, 1});
    CHECK(v[1].values == std::vector<double>{1, 3});
    CHECK(v[2].values == std::vector<double>{2, 2});
}

TEST_CASE("entailment client validates the probability") {
    Stub stub;
    http::EntailmentClient nli(stub.endpoint("/nli"));
    CHECK(nli.entail({"p", "h"}) == 0.25);
    CHECK_THROWS_AS(nli.entail({"p", "bad"}), ContractViolation);
}

TEST_CASE("unreachable backends and bad URLs") {
    http::Endpoint e;
    e.base_url = "http://127.0.0.1:1/v1";
    e.max_attempts = 2;
    e.backoff = std::chrono::milliseconds(1);
    e.timeout_seconds = 1;
    http::ChatGenerator gen(e);
    try {
        gen.generate({"", "x", 8, 0.0});
        FAIL("expected a gateway error");
    } catch (const GatewayError& err) {
        CHECK(err.status == 0);
    }
    e.base_url = "127.0.0.1/v1";
    CHECK_THROWS_AS(http::ChatGenerator{e}, ConfigError);
}
