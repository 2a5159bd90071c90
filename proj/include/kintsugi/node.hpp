#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>

#include "kintsugi/clock.hpp"
#include "kintsugi/directory.hpp"
#include "kintsugi/oprf.hpp"
#include "kintsugi/sharing.hpp"
#include "kintsugi/signing.hpp"
#include "kintsugi/wire.hpp"

namespace kintsugi {

struct UserRecord {
    std::string username;
    uint8_t group_id = 0;
    Share share;  // exactly one current-epoch share
    Bytes backup; // EncryptedBackup wire bytes; present iff share present
    uint32_t committee_n = 0;
    PublicKey user_pubkey{};
    // Version of the directory entry this record belongs to. User-authorized
    // mutations must carry a strictly higher version, which kills replays of
    // captured directives/completes across re-registrations.
    uint64_t directory_version = 0;

    bool operator==(const UserRecord&) const = default;
};

// Token bucket per source identifier. Tokens are fractional because the
// default refill (5/hour) is far below one per second.
class RateLimiter {
public:
    RateLimiter(uint32_t capacity, double refill_per_sec)
        : capacity_(capacity), refill_per_sec_(refill_per_sec) {}

    bool admit(const std::string& source, uint64_t now);

private:
    struct Bucket {
        double tokens;
        uint64_t last;
    };
    uint32_t capacity_;
    double refill_per_sec_;
    std::map<std::string, Bucket> buckets_;
};

struct NodeConfig {
    std::string node_id;
    std::string listen_address; // advisory; transports bind it
    uint32_t rate_capacity = 5;
    double rate_refill_per_hour = 5.0;
    std::string storage_path; // empty = in-memory only
};

// Transport-agnostic node runtime: bytes in, bytes out. Both the simulator
// and the TCP daemon drive this one entry point.
class Node {
public:
    Node(NodeConfig cfg, Clock& clock, Rng& rng);

    // Full request/response step for one envelope from `source` (the
    // rate-limit key). Always returns a response envelope.
    Bytes handle(const std::string& source, ByteSpan envelope_bytes);

    const std::string& id() const { return cfg_.node_id; }
    const BoxPublicKey& transport_pk() const { return transport_.pk; }
    const NodeConfig& config() const { return cfg_; }

    // introspection for tests and the collusion oracle
    const UserRecord* record(const std::string& username) const;
    size_t record_count() const { return records_.size(); }
    const std::map<std::string, UserRecord>& records() const { return records_; }
    DirectoryStore& directory() { return directory_; }
    const DirectoryStore& directory() const { return directory_; }

    void persist() const; // no-op without a storage path

private:
    Message dispatch(const std::string& source, const Envelope& env);

    Message on_register(const RegisterRequest& m);
    Message on_recovery(const std::string& source, const RecoveryRequest& m);
    Message on_refresh_directive(const RefreshDirective& m);
    Message on_refresh_install(const RefreshInstall& m);
    Message on_refresh_complete(const RefreshComplete& m);
    Message on_directory_put(const DirectoryPut& m);
    Message on_directory_get(const DirectoryGet& m) const;

    void load_or_init(Rng& rng);

    NodeConfig cfg_;
    Clock& clock_;
    Rng& rng_;
    BoxKeypair transport_;
    RateLimiter limiter_;
    std::map<std::string, UserRecord> records_;
    DirectoryStore directory_;
    bool dirty_ = false;

    // idempotency: duplicate deliveries replay the original response
    std::map<SessionId, Bytes> response_cache_;
    std::deque<SessionId> response_order_;
};

} // namespace kintsugi
