#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "labelscout/gateway.hpp"

namespace labelscout {

/// Persistent content-addressed response store.
///
/// Layout: `<dir>/objects/<2 hex>/<digest>` holds the payload bytes and
/// `<dir>/index.jsonl` is an append-only log of put/evict records. An empty
/// directory path gives a memory-only cache.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const CacheKey& key);
    void put(const CacheKey& key, const std::string& payload);

    /// Evicts every entry in scope, returning the number removed.
    std::size_t flush(CacheScope scope);

    std::size_t size() const;
    std::size_t size(Capability c) const;
    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    struct Entry {
        Capability capability;
        std::optional<std::string> payload;  // loaded lazily
    };

    std::filesystem::path object_path(const std::string& digest) const;
    void append_index(const std::string& line);

    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Entry> entries_;
    std::ofstream index_;
};

}  // namespace labelscout
