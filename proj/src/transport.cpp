#include "kintsugi/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "kintsugi/frame.hpp"

namespace kintsugi {

namespace {

using json = nlohmann::json;

uint64_t mono_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void ignore_sigpipe() {
    // writes to sockets the peer already closed must fail with EPIPE, not
    // kill the process; both the daemon and the client driver rely on this
    static const int once = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)once;
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

sockaddr_in resolve(const AddrParts& parts) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(parts.port);
    std::string host = parts.host == "localhost" ? "127.0.0.1" : parts.host;
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
        fail(Errc::scenario_error, "not a numeric IPv4 host: " + parts.host);
    return sa;
}

} // namespace

AddrParts split_address(const std::string& address) {
    size_t pos = address.rfind(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == address.size())
        fail(Errc::scenario_error, "address must be host:port: " + address);
    AddrParts out;
    out.host = address.substr(0, pos);
    unsigned long port = 0;
    for (size_t i = pos + 1; i < address.size(); ++i) {
        char c = address[i];
        if (c < '0' || c > '9') fail(Errc::scenario_error, "bad port in address: " + address);
        port = port * 10 + (c - '0');
        if (port > 65535) fail(Errc::scenario_error, "port out of range: " + address);
    }
    out.port = static_cast<uint16_t>(port);
    return out;
}

// ===== client driver =====

namespace {

// flushes what the kernel will take; false = connection is gone
bool flush_bytes(int fd, Bytes& outbox) {
    while (!outbox.empty()) {
        ssize_t n = ::send(fd, outbox.data(), outbox.size(), 0);
        if (n > 0) {
            outbox.erase(outbox.begin(), outbox.begin() + n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return true;
        return false;
    }
    return true;
}

struct Conn {
    int fd = -1;
    std::string node_id;
    bool connecting = true;
    bool dead = false;
    Bytes outbox;
    FrameReader reader;
    size_t expected = 0; // responses owed

    ~Conn() {
        if (fd >= 0) ::close(fd);
    }
};

} // namespace

void drive_session_tcp(Session& session, const TcpOptions& opts) {
    ignore_sigpipe();
    std::map<std::string, Conn> conns; // keyed by address
    const uint64_t deadline = mono_ms() + opts.deadline_ms;

    auto dispatch = [&](const std::vector<Outgoing>& batch) {
        for (const Outgoing& out : batch) {
            Conn& c = conns[out.dest_address];
            if (c.fd < 0 && !c.dead) {
                AddrParts parts = split_address(out.dest_address);
                sockaddr_in sa = resolve(parts);
                c.fd = ::socket(AF_INET, SOCK_STREAM, 0);
                if (c.fd < 0) {
                    c.dead = true;
                } else {
                    set_nonblocking(c.fd);
                    int one = 1;
                    ::setsockopt(c.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                    if (::connect(c.fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0)
                        c.connecting = false;
                    else if (errno != EINPROGRESS)
                        c.dead = true;
                }
                c.node_id = out.dest_id;
            }
            if (c.dead) continue; // unreachable node: the session sees silence
            Bytes framed = frame_message(out.envelope);
            c.outbox.insert(c.outbox.end(), framed.begin(), framed.end());
            ++c.expected;
            if (!c.connecting && !flush_bytes(c.fd, c.outbox)) c.dead = true;
        }
    };

    dispatch(session.start());

    while (!session.done()) {
        std::vector<pollfd> fds;
        std::vector<Conn*> order;
        for (auto& [addr, c] : conns) {
            if (c.dead || c.fd < 0) continue;
            short events = 0;
            if (c.connecting || !c.outbox.empty()) events |= POLLOUT;
            if (!c.connecting && c.expected > 0) events |= POLLIN;
            if (!events) continue;
            fds.push_back({c.fd, events, 0});
            order.push_back(&c);
        }
        if (fds.empty()) break; // nothing reachable can still answer

        uint64_t now = mono_ms();
        if (now >= deadline) break;
        int rc = ::poll(fds.data(), fds.size(), static_cast<int>(deadline - now));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) break; // deadline

        for (size_t i = 0; i < fds.size() && !session.done(); ++i) {
            Conn& c = *order[i];
            if (fds[i].revents == 0) continue;
            if (c.connecting && (fds[i].revents & (POLLOUT | POLLERR | POLLHUP))) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(c.fd, SOL_SOCKET, SO_ERROR, &err, &len);
                if (err != 0) {
                    c.dead = true;
                    continue;
                }
                c.connecting = false;
                if (!flush_bytes(c.fd, c.outbox)) {
                    c.dead = true;
                    continue;
                }
            }
            if (fds[i].revents & POLLOUT) {
                if (!flush_bytes(c.fd, c.outbox)) {
                    c.dead = true;
                    continue;
                }
            }
            if (fds[i].revents & (POLLIN | POLLHUP)) {
                uint8_t buf[16384];
                while (true) {
                    ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
                    if (n > 0) {
                        try {
                            c.reader.feed(ByteSpan(buf, static_cast<size_t>(n)));
                            while (auto frame = c.reader.next()) {
                                if (c.expected > 0) --c.expected;
                                dispatch(session.on_message(c.node_id, *frame));
                                if (session.done()) break;
                            }
                        } catch (const Error&) {
                            c.dead = true; // oversize or garbage framing
                            break;
                        }
                        if (session.done()) break;
                        continue;
                    }
                    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
                    c.dead = true;
                    break;
                }
            }
        }
    }

    if (!session.done()) session.cancel();
}

// ===== daemon =====

DaemonConfig load_daemon_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::scenario_error, "cannot read config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        fail(Errc::scenario_error, "config is not a JSON object: " + path);
    for (const auto& [key, value] : root.items()) {
        (void)value;
        if (key != "node_id" && key != "listen" && key != "rate_capacity" &&
            key != "rate_refill_per_hour" && key != "storage" && key != "port_file")
            fail(Errc::scenario_error, "unknown config key \"" + key + "\" in " + path);
    }
    DaemonConfig cfg;
    try {
        if (!root.contains("node_id")) fail(Errc::scenario_error, "config needs node_id");
        cfg.node.node_id = root["node_id"].get<std::string>();
        cfg.node.listen_address = root.value("listen", std::string("127.0.0.1:0"));
        cfg.node.rate_capacity = root.value("rate_capacity", 5u);
        cfg.node.rate_refill_per_hour = root.value("rate_refill_per_hour", 5.0);
        cfg.node.storage_path = root.value("storage", std::string());
        cfg.port_file = root.value("port_file", std::string());
    } catch (const json::exception& e) {
        fail(Errc::scenario_error, std::string("malformed config: ") + e.what());
    }
    split_address(cfg.node.listen_address); // reject bad addresses up front
    return cfg;
}

namespace {

struct ServerConn {
    int fd = -1;
    std::string peer_ip;
    Bytes outbox;
    FrameReader reader;
    bool closing = false; // flush the outbox, then close

    ~ServerConn() {
        if (fd >= 0) ::close(fd);
    }
};

} // namespace

void run_node_daemon(const DaemonConfig& cfg, const std::atomic<bool>& stop,
                     const std::function<void(uint16_t)>& on_listening) {
    ignore_sigpipe();
    SystemClock clock;
    SystemRng rng;
    Node node(cfg.node, clock, rng);

    AddrParts parts = split_address(cfg.node.listen_address);
    sockaddr_in sa = resolve(parts);
    int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) fail(Errc::connection_closed, "socket: " + std::string(strerror(errno)));
    int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(listener);
        fail(Errc::connection_closed,
             "bind " + cfg.node.listen_address + ": " + strerror(errno));
    }
    if (::listen(listener, 64) != 0) {
        ::close(listener);
        fail(Errc::connection_closed, "listen: " + std::string(strerror(errno)));
    }
    set_nonblocking(listener);

    sockaddr_in bound{};
    socklen_t blen = sizeof bound;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&bound), &blen);
    uint16_t port = ntohs(bound.sin_port);
    if (!cfg.port_file.empty()) {
        std::ofstream pf(cfg.port_file, std::ios::trunc);
        pf << port << "\n";
    }
    if (on_listening) on_listening(port);

    std::map<int, ServerConn> conns;
    while (!stop.load(std::memory_order_relaxed)) {
        std::vector<pollfd> fds;
        fds.push_back({listener, POLLIN, 0});
        for (auto& [fd, c] : conns) {
            short events = c.closing ? 0 : POLLIN;
            if (!c.outbox.empty()) events |= POLLOUT;
            fds.push_back({fd, events, 0});
        }
        int rc = ::poll(fds.data(), fds.size(), 200);
        if (rc < 0 && errno != EINTR) break;
        if (rc <= 0) continue;

        if (fds[0].revents & POLLIN) {
            while (true) {
                sockaddr_in peer{};
                socklen_t plen = sizeof peer;
                int fd = ::accept(listener, reinterpret_cast<sockaddr*>(&peer), &plen);
                if (fd < 0) break;
                set_nonblocking(fd);
                ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                char ip[INET_ADDRSTRLEN] = "?";
                ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
                ServerConn& c = conns[fd];
                c.fd = fd;
                // rate-limit by IP: reconnecting must not refill the bucket
                c.peer_ip = ip;
            }
        }

        std::vector<int> drop;
        for (size_t i = 1; i < fds.size(); ++i) {
            auto it = conns.find(fds[i].fd);
            if (it == conns.end()) continue;
            ServerConn& c = it->second;
            bool gone = (fds[i].revents & (POLLERR | POLLNVAL)) != 0;
            if (!gone && (fds[i].revents & POLLIN)) {
                uint8_t buf[16384];
                while (true) {
                    ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
                    if (n > 0) {
                        try {
                            c.reader.feed(ByteSpan(buf, static_cast<size_t>(n)));
                            while (auto frame = c.reader.next()) {
                                Bytes reply = node.handle(c.peer_ip, *frame);
                                Bytes framed = frame_message(reply);
                                c.outbox.insert(c.outbox.end(), framed.begin(), framed.end());
                            }
                        } catch (const Error&) {
                            // oversize frame aborts the connection, after any
                            // already-queued replies drain
                            c.closing = true;
                        }
                        continue;
                    }
                    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
                    gone = true; // peer closed or hard error
                    break;
                }
            }
            if (!gone && !c.outbox.empty()) {
                if (!flush_bytes(c.fd, c.outbox)) gone = true;
            }
            if (!gone && (fds[i].revents & POLLHUP) && c.outbox.empty()) gone = true;
            if (gone || (c.closing && c.outbox.empty())) drop.push_back(c.fd);
        }
        for (int fd : drop) conns.erase(fd);
    }
    ::close(listener);
}

} // namespace kintsugi
