#include "msdash/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "msdash/errors.hpp"

namespace msdash::bridge {

using nlohmann::json;

namespace {

void write_all(int fd, const char* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw std::runtime_error(std::string("send failed: ") + std::strerror(errno));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

// Returns the number of bytes read before end of stream.
std::size_t read_all(int fd, char* data, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, data + got, n - got, 0);
        if (r < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw std::runtime_error(std::string("recv failed: ") + std::strerror(errno));
        }
        if (r == 0) {
            break;
        }
        got += static_cast<std::size_t>(r);
    }
    return got;
}

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    const std::string h = host == "localhost" ? "127.0.0.1" : host;
    if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
        throw UsageError("bad IPv4 address '" + host + "'");
    }
    return addr;
}

json mask_json(const ActionMask& mask) {
    json bits = json::array();
    for (bool b : mask.bits) {
        bits.push_back(b);
    }
    return bits;
}

json breakdown_json(const EpisodeBreakdown& b) {
    return {{"reward", b.reward},
            {"utility", b.utility},
            {"switch_penalty", b.switch_penalty},
            {"rebuffer_penalty", b.rebuffer_penalty},
            {"rebuffer_s", b.rebuffer_s},
            {"startup_delay_s", b.startup_delay_s}};
}

} // namespace

std::string encode_frame(const std::string& payload) {
    if (payload.size() > kMaxFrameBytes) {
        throw UsageError("frame too large");
    }
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(payload.size() + 4);
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += payload;
    return out;
}

std::optional<std::string> read_frame(int fd) {
    unsigned char header[4];
    const std::size_t got = read_all(fd, reinterpret_cast<char*>(header), 4);
    if (got == 0) {
        return std::nullopt;
    }
    if (got < 4) {
        throw std::runtime_error("truncated frame header");
    }
    const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                            (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
    if (n > kMaxFrameBytes) {
        throw std::runtime_error("frame of " + std::to_string(n) + " bytes exceeds the limit");
    }
    std::string payload(n, '\0');
    if (read_all(fd, payload.data(), n) != n) {
        throw std::runtime_error("truncated frame payload");
    }
    return payload;
}

void write_frame(int fd, const std::string& payload) {
    const std::string frame = encode_frame(payload);
    write_all(fd, frame.data(), frame.size());
}

json step_reply(std::uint64_t id, const EnvStep& step, const StreamingEnv& env) {
    json info = {{"path", step.info.path},
                 {"time", step.info.time},
                 {"substituted", step.info.substituted},
                 {"trace_ids", step.info.trace_ids},
                 {"observation_size", env.observation_size()},
                 {"action_size", env.action_space().size()},
                 {"action_space", to_string(env.action_space().kind)},
                 {"raw_observation", step.info.raw_observation}};
    if (step.info.episode) {
        info["episode"] = breakdown_json(*step.info.episode);
    }
    return {{"id", id},
            {"kind", "obs_reply"},
            {"observation", step.observation},
            {"mask", mask_json(step.mask)},
            {"reward", step.reward},
            {"done", step.done},
            {"info", std::move(info)}};
}

json error_reply(std::optional<std::uint64_t> id, const std::string& code, const std::string& message) {
    json reply = {{"kind", "error"}, {"code", code}, {"message", message}};
    reply["id"] = id ? json(*id) : json(nullptr);
    return reply;
}

Session::Session(EnvConfig cfg, std::shared_ptr<const EnvAssets> assets) : env_(std::move(cfg), std::move(assets)) {}

std::string Session::handle(const std::string& payload, bool& close_after) {
    json message;
    try {
        message = json::parse(payload);
    } catch (const json::parse_error& e) {
        close_after = true;
        return error_reply(std::nullopt, "malformed", e.what()).dump();
    }
    return handle(message, close_after).dump();
}

json Session::handle(const json& message, bool& close_after) {
    close_after = false;
    if (!message.is_object() || !message.contains("id") || !message["id"].is_number_integer() ||
        message["id"].get<std::int64_t>() < 0 ||
        !message.contains("kind") || !message["kind"].is_string()) {
        close_after = true;
        return error_reply(std::nullopt, "malformed", "message needs a non-negative integer 'id' and a string 'kind'");
    }
    const auto id = message["id"].get<std::uint64_t>();
    if (last_id_ && id <= *last_id_) {
        close_after = true;
        return error_reply(id, "bad_id", "message ids must increase within a session");
    }
    last_id_ = id;
    const auto kind = message["kind"].get<std::string>();
    try {
        if (kind == "reset") {
            const auto seed = message.value("seed", std::uint64_t{0});
            const EnvStep step = env_.reset(seed);
            episode_open_ = !step.done;
            return step_reply(id, step, env_);
        }
        if (kind == "step") {
            if (!message.contains("action") || !message["action"].is_number_integer()) {
                close_after = true;
                return error_reply(id, "malformed", "step needs an integer 'action'");
            }
            if (!episode_open_) {
                return error_reply(id, "no_episode", "step before reset or after the episode ended");
            }
            const EnvStep step = env_.step(message["action"].get<int>());
            episode_open_ = !step.done;
            return step_reply(id, step, env_);
        }
        if (kind == "close") {
            close_after = true;
            return {{"id", id}, {"kind", "close"}};
        }
    } catch (const ContractViolation& e) {
        return error_reply(id, "masked_action", e.what());
    } catch (const std::exception& e) {
        close_after = true;
        return error_reply(id, "internal", e.what());
    }
    close_after = true;
    return error_reply(id, "malformed", "unknown kind '" + kind + "'");
}

Server::Server(EnvConfig cfg, const std::string& host, std::uint16_t port)
    : cfg_(std::move(cfg)), assets_(build_assets(cfg_)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_address(host, port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Server::~Server() {
    stop();
    for (auto& t : sessions_) {
        if (t.joinable()) {
            t.join();
        }
    }
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
    }
}

void Server::stop() { stopping_ = true; }

void Server::serve(std::size_t max_sessions) {
    std::size_t accepted = 0;
    while (!stopping_ && (max_sessions == 0 || accepted < max_sessions)) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 100);
        if (ready <= 0) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            continue;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        ++accepted;
        std::lock_guard lock(mu_);
        sessions_.emplace_back([this, fd] { run_session(fd); });
    }
    std::vector<std::thread> open;
    {
        std::lock_guard lock(mu_);
        open.swap(sessions_);
    }
    for (auto& t : open) {
        t.join();
    }
}

void Server::run_session(int fd) {
    try {
        Session session(cfg_, assets_);
        while (true) {
            const auto payload = read_frame(fd);
            if (!payload) {
                break;
            }
            bool close_after = false;
            write_frame(fd, session.handle(*payload, close_after));
            if (close_after) {
                break;
            }
        }
    } catch (const std::exception& e) {
        try {
            write_frame(fd, error_reply(std::nullopt, "transport", e.what()).dump());
        } catch (const std::exception&) {
        }
    }
    ::close(fd);
}

Client::Client(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
        throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
    }
    sockaddr_in addr = make_address(host, port);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd_);
        throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::optional<std::string> Client::raw(const std::string& payload) {
    write_frame(fd_, payload);
    return read_frame(fd_);
}

json Client::call(json message) {
    message["id"] = next_id_++;
    const auto reply = raw(message.dump());
    if (!reply) {
        throw std::runtime_error("server closed the connection");
    }
    return json::parse(*reply);
}

json Client::reset(std::uint64_t seed) { return call({{"kind", "reset"}, {"seed", seed}}); }

json Client::step(int action) { return call({{"kind", "step"}, {"action", action}}); }

json Client::close() { return call({{"kind", "close"}}); }

} // namespace msdash::bridge
