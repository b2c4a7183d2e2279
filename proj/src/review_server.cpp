#include "labelscout/review_server.hpp"

#include <httplib.h>

#include "labelscout/error.hpp"

namespace labelscout {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    reply(res, status, json{{"error", code}, {"message", message}});
}

struct NotFound {};

std::optional<std::int64_t> parse_id(const std::string& s) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

json label_entry(const Label& l) {
    return json{{"id", l.id},
                {"name", l.name},
                {"status", to_string(l.status)},
                {"provenance", to_string(l.provenance)},
                {"created_at_version", l.created_at_version},
                {"evidence", l.evidence}};
}

json pair_entry(const LabelSpace& space, const BorderlinePair& p) {
    return json{{"id", p.id},
                {"status", to_string(p.status)},
                {"similarity", p.similarity},
                {"label_a", label_entry(space.label(p.label_a))},
                {"label_b", label_entry(space.label(p.label_b))},
                {"resolution", p.resolution ? json(to_string(*p.resolution)) : json(nullptr)},
                {"judge_opinion", p.judge_opinion ? json(*p.judge_opinion) : json(nullptr)}};
}

ReviewServer::ReviewServer(std::filesystem::path space_file, ReviewOptions options)
    : file_(std::move(space_file)), options_(std::move(options)), space_(LabelSpace::load(file_)),
      server_(std::make_unique<httplib::Server>()) {
    routes();
}

ReviewServer::~ReviewServer() { stop(); }

LabelSpace ReviewServer::snapshot() const {
    std::lock_guard lock(mu_);
    return space_;
}

void ReviewServer::routes() {
    auto& s = *server_;
    if (!options_.token.empty()) {
        s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (req.path.rfind("/api/", 0) != 0 || req.path == "/api/health")
                return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("Authorization") == "Bearer " + options_.token)
                return httplib::Server::HandlerResponse::Unhandled;
            fail(res, 401, "unauthorized", "missing or wrong bearer token");
            return httplib::Server::HandlerResponse::Handled;
        });
    }

    s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(mu_);
        reply(res, 200, json{{"status", "ok"}, {"version", space_.version()}});
    });

    s.Get("/api/pairs", [this](const httplib::Request& req, httplib::Response& res) {
        const bool all = req.get_param_value("status") == "all";
        std::lock_guard lock(mu_);
        json pairs = json::array();
        for (const auto& p : space_.pairs()) {
            if (all || p.status == PairStatus::pending) pairs.push_back(pair_entry(space_, p));
        }
        reply(res, 200, json{{"version", space_.version()}, {"pairs", pairs}});
    });

    s.Get("/api/labels", [this](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(mu_);
        json labels = json::array();
        for (const auto& l : space_.labels()) labels.push_back(label_entry(l));
        reply(res, 200, json{{"version", space_.version()}, {"labels", labels}});
    });

    // Shared mutation path: parse, check version, apply to a copy, persist,
    // then swap in.
    auto mutate = [this](const httplib::Request& req, httplib::Response& res,
                         const std::function<json(LabelSpace&, std::int64_t, const json&)>& apply) {
        const auto id = parse_id(req.matches[1]);
        if (!id) return fail(res, 404, "not_found", "bad id");
        json body;
        try {
            body = json::parse(req.body);
            if (!body.is_object()) throw DataError("body must be a JSON object");
        } catch (const std::exception& e) {
            return fail(res, 400, "bad_request", e.what());
        }
        std::lock_guard lock(mu_);
        if (body.contains("expected_version")) {
            if (!body["expected_version"].is_number_unsigned())
                return fail(res, 400, "bad_request", "expected_version must be a non-negative integer");
            const auto expected = body["expected_version"].get<std::uint64_t>();
            if (expected != space_.version())
                return reply(res, 409, json{{"error", "conflict"},
                                            {"message", "space changed since version " + std::to_string(expected)},
                                            {"version", space_.version()}});
        }
        LabelSpace next = space_;
        json result;
        try {
            result = apply(next, *id, body);
        } catch (const NotFound&) {
            return fail(res, 404, "not_found", "no such resource");
        } catch (const CollisionError& e) {
            return fail(res, 422, "collision", e.what());
        } catch (const StateError& e) {
            return reply(res, 409, json{{"error", "conflict"}, {"message", e.what()}, {"version", space_.version()}});
        } catch (const json::exception& e) {
            return fail(res, 400, "bad_request", e.what());
        } catch (const ConfigError& e) {
            return fail(res, 400, "bad_request", e.what());
        } catch (const DataError& e) {
            return fail(res, 400, "bad_request", e.what());
        }
        try {
            next.save(file_);
        } catch (const std::exception& e) {
            return fail(res, 500, "persist_failed", e.what());
        }
        space_ = std::move(next);
        result["version"] = space_.version();
        reply(res, 200, result);
    };

    s.Post(R"(/api/pairs/(-?\d+)/resolution)", [mutate](const httplib::Request& req, httplib::Response& res) {
        mutate(req, res, [](LabelSpace& space, std::int64_t id, const json& body) {
            const BorderlinePair* found = nullptr;
            for (const auto& p : space.pairs())
                if (p.id == id) found = &p;
            if (!found) throw NotFound{};
            Resolution r;
            try {
                r = resolution_from_string(body.at("resolution").get<std::string>());
            } catch (const Error& e) {
                throw ConfigError(e.what());
            }
            std::optional<LabelId> target;
            std::optional<std::string> name;
            if (body.contains("rename_target")) target = body["rename_target"].get<LabelId>();
            if (body.contains("new_name")) name = body["new_name"].get<std::string>();
            if (r == Resolution::rename && (!target || !name))
                throw ConfigError("rename needs rename_target and new_name");
            space.resolve(id, r, target, name);
            return json{{"pair", pair_entry(space, space.pair(id))}};
        });
    });

    s.Post(R"(/api/labels/(-?\d+)/rename)", [mutate](const httplib::Request& req, httplib::Response& res) {
        mutate(req, res, [](LabelSpace& space, std::int64_t id, const json& body) {
            if (!space.find(id)) throw NotFound{};
            space.rename(id, body.at("name").get<std::string>());
            return json{{"label", label_entry(space.label(id))}};
        });
    });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            fail(res, 500, "internal", e.what());
        }
    });

    if (!options_.static_dir.empty()) {
        if (!s.set_mount_point("/", options_.static_dir.string()))
            throw ConfigError("review static directory not found: " + options_.static_dir.string());
    }
}

int ReviewServer::bind() {
    if (options_.port == 0) {
        port_ = server_->bind_to_any_port(options_.host);
        if (port_ < 0) throw ConfigError("cannot bind " + options_.host);
    } else {
        if (!server_->bind_to_port(options_.host, options_.port))
            throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
        port_ = options_.port;
    }
    return port_;
}

int ReviewServer::start() {
    bind();
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ReviewServer::run() {
    bind();
    server_->listen_after_bind();
}

void ReviewServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace labelscout
