#include "labelscout/http_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "labelscout/error.hpp"

namespace labelscout::http {

using nlohmann::json;

JsonTransport::JsonTransport(Endpoint endpoint) : endpoint_(std::move(endpoint)) {
    const std::string& url = endpoint_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("backend URL must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (endpoint_.max_attempts < 1) endpoint_.max_attempts = 1;
}

json JsonTransport::post(const std::string& path_suffix, const json& body) const {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration<double>(endpoint_.timeout_seconds);
    const auto secs = static_cast<time_t>(timeout.count());
    const auto usecs = static_cast<time_t>((timeout.count() - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!endpoint_.api_key_env.empty()) {
        if (const char* token = std::getenv(endpoint_.api_key_env.c_str()); token && *token) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    const std::string path = prefix_ + path_suffix;
    const std::string payload = body.dump();
    std::string last_error;
    int last_status = 0;
    for (int attempt = 0; attempt < endpoint_.max_attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(endpoint_.backoff * (1 << (attempt - 1)));
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_status = 0;
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_status = res->status;
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400) {
            throw GatewayError(origin_ + path + " returned " + std::to_string(res->status) + ": " + res->body,
                               res->status);
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error&) {
            throw ContractViolation(origin_ + path + " returned a non-JSON body");
        }
    }
    throw GatewayError(origin_ + path + ": " + last_error + " after " + std::to_string(endpoint_.max_attempts) +
                           " attempts",
                       last_status);
}

// ---------------------------------------------------------------------------

std::string ChatGenerator::id() const {
    return "http-chat:" + transport_.endpoint().base_url + ":" + transport_.endpoint().model;
}

std::string ChatGenerator::generate(const GenerationRequest& req) {
    json body = {{"model", transport_.endpoint().model},
                 {"messages",
                  json::array({{{"role", "system"}, {"content", req.system_prompt}},
                               {{"role", "user"}, {"content", req.user_prompt}}})},
                 {"max_tokens", req.max_tokens},
                 {"temperature", req.temperature}};
    const json res = transport_.post("/chat/completions", body);
    try {
        const auto& choice = res.at("choices").at(0);
        if (choice.value("finish_reason", std::string()) == "length")
            throw TruncatedResponseError("generation truncated at max_tokens=" + std::to_string(req.max_tokens));
        return choice.at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ContractViolation(std::string("malformed chat completion response: ") + e.what());
    }
}

std::string EmbeddingClient::id() const {
    return "http-embed:" + transport_.endpoint().base_url + ":" + transport_.endpoint().model;
}

std::vector<EmbeddingVector> EmbeddingClient::embed(std::span<const std::string> texts) {
    json body = {{"model", transport_.endpoint().model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const json res = transport_.post("/embeddings", body);
    try {
        const auto& data = res.at("data");
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : i;
            if (index >= texts.size() || seen[index]) throw ContractViolation("embedding response has a bad index");
            seen[index] = true;
            out[index].values = item.at("embedding").get<std::vector<double>>();
        }
        if (data.size() != texts.size()) throw ContractViolation("embedding response has the wrong length");
        return out;
    } catch (const json::exception& e) {
        throw ContractViolation(std::string("malformed embedding response: ") + e.what());
    }
}

std::string EntailmentClient::id() const {
    return "http-nli:" + transport_.endpoint().base_url + ":" + transport_.endpoint().model;
}

double EntailmentClient::entail(const EntailmentQuery& q) {
    json body = {{"premise", q.premise}, {"hypothesis", q.hypothesis}};
    if (!transport_.endpoint().model.empty()) body["model"] = transport_.endpoint().model;
    const json res = transport_.post("", body);
    if (!res.is_object() || !res.contains("entailment") || !res["entailment"].is_number())
        throw ContractViolation("entailment response lacks a numeric \"entailment\" field");
    const double p = res["entailment"].get<double>();
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw ContractViolation("entailment response is not a probability: " + res.dump());
    return p;
}

}  // namespace labelscout::http
