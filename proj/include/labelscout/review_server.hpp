#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "labelscout/labelspace.hpp"

namespace httplib {
class Server;
}

namespace labelscout {

struct ReviewOptions {
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    std::string token;  // bearer token; empty disables auth
    std::filesystem::path static_dir;
};

/// HTTP review API over one label-space file. Requests are handled
/// concurrently; mutations take a single lock, check the optional
/// expected_version, apply, then save the file before replying.
class ReviewServer {
public:
    ReviewServer(std::filesystem::path space_file, ReviewOptions options);
    ~ReviewServer();

    /// Binds and serves on a background thread. Returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const noexcept { return port_; }

    /// Snapshot of the current space.
    LabelSpace snapshot() const;

private:
    void routes();
    int bind();

    std::filesystem::path file_;
    ReviewOptions options_;
    mutable std::mutex mu_;
    LabelSpace space_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// Review-queue view of a pair: both labels with their evidence.
nlohmann::json pair_entry(const LabelSpace& space, const BorderlinePair& pair);
nlohmann::json label_entry(const Label& label);

}  // namespace labelscout
