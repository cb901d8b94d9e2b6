#pragma once

// In-process HTTP server on 127.0.0.1 for network tests.

#include <string>
#include <thread>

#include <httplib.h>

namespace flexkit::testing {

class LocalServer {
public:
    LocalServer() = default;
    ~LocalServer() { stop(); }
    LocalServer(const LocalServer &) = delete;
    LocalServer &operator=(const LocalServer &) = delete;

    httplib::Server &server() noexcept { return server_; }

    /// Binds an ephemeral port and starts serving; call after registering handlers.
    void start()
    {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop()
    {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    [[nodiscard]] int port() const noexcept { return port_; }
    [[nodiscard]] std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }
    [[nodiscard]] std::string url(const std::string &path) const { return base() + path; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace flexkit::testing
