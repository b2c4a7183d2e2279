#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "labelscout/cache.hpp"
#include "labelscout/error.hpp"
#include "labelscout/gateway.hpp"
#include "labelscout/mock.hpp"
#include "labelscout/similarity.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "labelscout-XXXXXX").string();
        if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Similarity from a symmetric lookup table; identical strings score 1 and
/// anything unlisted scores `fallback`.
class TableSimilarity : public labelscout::SimilarityModel {
public:
    explicit TableSimilarity(double fallback = 0.0) : fallback_(fallback) {}
    void set(const std::string& a, const std::string& b, double v) {
        table_[{a, b}] = v;
        table_[{b, a}] = v;
    }
    double similarity(const std::string& a, const std::string& b) override {
        if (a == b) return 1.0;
        auto it = table_.find({a, b});
        return it == table_.end() ? fallback_ : it->second;
    }

private:
    double fallback_;
    std::map<std::pair<std::string, std::string>, double> table_;
};

/// Judge answering from a table (order-insensitive); unlisted pairs are
/// unparseable.
class TableJudge : public labelscout::PairJudge {
public:
    void set(const std::string& a, const std::string& b, labelscout::Verdict v) {
        table_[{a, b}] = v;
        table_[{b, a}] = v;
    }
    labelscout::Verdict judge(const std::string& a, const std::string& b) override {
        ++calls_;
        auto it = table_.find({a, b});
        return it == table_.end() ? labelscout::Verdict::unparseable : it->second;
    }
    std::size_t calls() const override { return calls_; }

private:
    std::map<std::pair<std::string, std::string>, labelscout::Verdict> table_;
    std::size_t calls_ = 0;
};

/// All-mock gateway with a memory-only cache.
inline std::unique_ptr<labelscout::ModelGateway> mock_gateway(std::uint64_t seed = 0,
                                                              std::shared_ptr<labelscout::mock::Generator> gen = {}) {
    labelscout::GatewayRoles roles;
    roles.generator = gen ? gen : std::make_shared<labelscout::mock::Generator>(seed);
    roles.embedder = std::make_shared<labelscout::mock::Embedder>(seed);
    roles.nli = std::make_shared<labelscout::mock::Entailment>(seed);
    return std::make_unique<labelscout::ModelGateway>(roles, std::make_shared<labelscout::ResponseCache>());
}

}  // namespace testing
