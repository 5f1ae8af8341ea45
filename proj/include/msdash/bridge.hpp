#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "msdash/env.hpp"

namespace msdash::bridge {

/// Frames are a 4-byte big-endian payload length followed by a UTF-8 JSON document.
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;
inline constexpr int kProtocolVersion = 1;

std::string encode_frame(const std::string& payload);
/// Blocking. Returns nullopt on a clean end of stream before a header byte.
/// Throws std::runtime_error on a truncated or oversized frame.
std::optional<std::string> read_frame(int fd);
void write_frame(int fd, const std::string& payload);

nlohmann::json step_reply(std::uint64_t id, const EnvStep& step, const StreamingEnv& env);
nlohmann::json error_reply(std::optional<std::uint64_t> id, const std::string& code, const std::string& message);

/// Protocol state machine of one connection, independent of the transport.
class Session {
public:
    Session(EnvConfig cfg, std::shared_ptr<const EnvAssets> assets);

    /// Parses and answers one message. Sets `close_after` when the session must end.
    std::string handle(const std::string& payload, bool& close_after);
    nlohmann::json handle(const nlohmann::json& message, bool& close_after);

    const StreamingEnv& env() const noexcept { return env_; }

private:
    StreamingEnv env_;
    std::optional<std::uint64_t> last_id_;
    bool episode_open_ = false;
};

/// TCP listener on a loopback address; one thread per accepted connection.
class Server {
public:
    Server(EnvConfig cfg, const std::string& host = "127.0.0.1", std::uint16_t port = 0);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    /// Accepts connections until stop() or until `max_sessions` sessions were accepted
    /// (0 = unlimited), then waits for the open sessions to end.
    void serve(std::size_t max_sessions = 0);
    void stop();

private:
    void run_session(int fd);

    EnvConfig cfg_;
    std::shared_ptr<const EnvAssets> assets_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::mutex mu_;
    std::vector<std::thread> sessions_;
};

class Client {
public:
    Client(const std::string& host, std::uint16_t port);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    /// Assigns the next message id, sends, and waits for the reply.
    nlohmann::json call(nlohmann::json message);
    /// Sends a frame verbatim and returns the raw reply (nullopt if the server hung up).
    std::optional<std::string> raw(const std::string& payload);

    nlohmann::json reset(std::uint64_t seed);
    nlohmann::json step(int action);
    nlohmann::json close();

private:
    int fd_ = -1;
    std::uint64_t next_id_ = 1;
};

} // namespace msdash::bridge
