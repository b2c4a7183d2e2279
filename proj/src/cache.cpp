#include "labelscout/cache.hpp"

#include <sstream>

#include <json.hpp>

#include "labelscout/error.hpp"

namespace labelscout {

namespace fs = std::filesystem;
using nlohmann::json;

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    fs::create_directories(dir_ / "objects", ec);
    if (ec) throw GatewayError("cache: cannot create " + dir_.string() + ": " + ec.message());

    const fs::path index_path = dir_ / "index.jsonl";
    if (std::ifstream in(index_path); in) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json rec;
            try {
                rec = json::parse(line);
                const auto digest = rec.at("key").get<std::string>();
                if (rec.at("op") == "put") {
                    entries_[digest] = Entry{capability_from_string(rec.at("capability").get<std::string>()),
                                             std::nullopt};
                } else {
                    entries_.erase(digest);
                }
            } catch (const std::exception&) {
                // A torn final line from an interrupted write is tolerated.
                continue;
            }
        }
    }
    index_.open(index_path, std::ios::app | std::ios::binary);
    if (!index_) throw GatewayError("cache: cannot open " + index_path.string());
}

fs::path ResponseCache::object_path(const std::string& digest) const {
    return dir_ / "objects" / digest.substr(0, 2) / digest;
}

void ResponseCache::append_index(const std::string& line) {
    index_ << line << '\n';
    index_.flush();
    if (!index_) throw GatewayError("cache: index write failed in " + dir_.string());
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key.digest);
    if (it == entries_.end()) return std::nullopt;
    if (!it->second.payload) {
        std::ifstream in(object_path(key.digest), std::ios::binary);
        if (!in) {
            entries_.erase(it);
            return std::nullopt;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        it->second.payload = buf.str();
    }
    return it->second.payload;
}

void ResponseCache::put(const CacheKey& key, const std::string& payload) {
    std::lock_guard lock(mu_);
    if (entries_.contains(key.digest)) return;
    if (!dir_.empty()) {
        const fs::path path = object_path(key.digest);
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        const fs::path tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
            if (!out) throw GatewayError("cache: cannot write " + tmp.string());
        }
        fs::rename(tmp, path, ec);
        if (ec) throw GatewayError("cache: cannot commit " + path.string() + ": " + ec.message());
        json rec = {{"op", "put"},
                    {"key", key.digest},
                    {"capability", to_string(key.capability)},
                    {"backend", key.backend_id}};
        append_index(rec.dump());
    }
    entries_[key.digest] = Entry{key.capability, payload};
}

std::size_t ResponseCache::flush(CacheScope scope) {
    std::lock_guard lock(mu_);
    std::size_t evicted = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
        const Capability c = it->second.capability;
        const bool in_scope = scope == CacheScope::all ||
                              (scope == CacheScope::generate && c == Capability::generate) ||
                              (scope == CacheScope::embed && c == Capability::embed) ||
                              (scope == CacheScope::entail && c == Capability::entail);
        if (!in_scope) {
            ++it;
            continue;
        }
        if (!dir_.empty()) {
            std::error_code ec;
            fs::remove(object_path(it->first), ec);
            if (ec) throw GatewayError("cache: cannot evict " + it->first + ": " + ec.message());
            append_index(json{{"op", "evict"}, {"key", it->first}}.dump());
        }
        it = entries_.erase(it);
        ++evicted;
    }
    return evicted;
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::size_t ResponseCache::size(Capability c) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.capability == c;
    return n;
}

}  // namespace labelscout
