#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>

#include "kintsugi/client.hpp"
#include "kintsugi/node.hpp"

namespace kintsugi {

// Splits "host:port". ScenarioError on anything that does not parse; only
// numeric IPv4 hosts and "localhost" are supported (the wire mode is
// localhost-oriented by design).
struct AddrParts {
    std::string host;
    uint16_t port = 0;
};
AddrParts split_address(const std::string& address);

struct TcpOptions {
    // Overall budget for one session. Unreachable nodes surface as silence,
    // so a session missing its quorum ends via cancel() when this expires.
    uint64_t deadline_ms = 15000;
};

// Drives a client session over TCP: one pooled connection per distinct
// address, length-framed envelopes, responses fed back in arrival order.
// Returns once the session settles; on deadline or total connection loss the
// session is cancelled so failure_code() names what was still missing.
void drive_session_tcp(Session& session, const TcpOptions& opts = {});

struct DaemonConfig {
    NodeConfig node;        // node.listen_address is the bind address
    std::string port_file;  // when set, the bound port is written here
};

// Parses the daemon config JSON: {"node_id", "listen", "rate_capacity",
// "rate_refill_per_hour", "storage", "port_file"}; unknown keys rejected.
DaemonConfig load_daemon_config(const std::string& path);

// Accept/serve loop: every complete frame is handed to Node::handle with the
// peer IP as the rate-limit source, and the response framed back. Oversize
// frames abort their connection. Runs until `stop` is set (checked between
// poll rounds); `on_listening` fires once with the bound port.
void run_node_daemon(const DaemonConfig& cfg, const std::atomic<bool>& stop,
                     const std::function<void(uint16_t)>& on_listening = {});

} // namespace kintsugi
