#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kintsugi/directory.hpp"
#include "kintsugi/oprf.hpp"
#include "kintsugi/sharing.hpp"
#include "kintsugi/signing.hpp"
#include "kintsugi/wire.hpp"

namespace kintsugi {

// The sealed backup carries the user's payload plus the signing key, so a
// password alone recovers rotation capability as well:
//   u32 payload length || payload || ed25519 secret key (64)
Bytes pack_backup_payload(ByteSpan payload, const SigningKeypair& key);
struct UnpackedBackup {
    Bytes payload;
    SigningKeypair key;
};
UnpackedBackup unpack_backup_payload(ByteSpan plaintext);

struct NodeAddress {
    std::string node_id;
    std::string address;

    bool operator==(const NodeAddress&) const = default;
};

// One message the session wants delivered. Transports route by id/address and
// feed whatever comes back into on_message.
struct Outgoing {
    std::string dest_id;
    std::string dest_address;
    Bytes envelope;
};

// Client-side protocol state machine. Sessions are single-use: start() once,
// then feed every arriving envelope to on_message until status() leaves
// `running`. Sessions never time out on their own; an owner that gives up
// calls cancel() to learn what was still missing.
class Session {
public:
    enum class Status { idle, running, succeeded, failed };

    virtual ~Session() = default;

    std::vector<Outgoing> start();
    std::vector<Outgoing> on_message(const std::string& from_id, ByteSpan envelope);

    Status status() const { return status_; }
    bool done() const { return status_ == Status::succeeded || status_ == Status::failed; }
    Errc failure_code() const { return failure_code_; }
    const std::string& failure_detail() const { return failure_detail_; }
    void cancel(); // running -> failed with what the session was waiting on

    // "-> n1 RegisterRequest" / "<- n1 RegisterAck" lines, in order
    const std::vector<std::string>& trace() const { return trace_; }

protected:
    explicit Session(Rng& rng) : rng_(rng) {}

    virtual std::vector<Outgoing> begin() = 0;
    // req names the request this envelope answers; replies are routed by
    // what was asked, not by what phase the session happens to be in
    virtual std::vector<Outgoing> step(const std::string& from_id, MsgType req,
                                       const Envelope& env) = 0;
    virtual std::string waiting_on() const = 0;

    // tracked=false sends a request whose response is accepted and dropped:
    // best-effort notifications the session will not wait on.
    Outgoing send(const NodeAddress& to, const Message& m, bool tracked = true);
    void succeed();
    void fail_with(Errc code, const std::string& detail);
    // wipe in-memory key material; every terminal transition lands here,
    // including cancel() and errors thrown out of begin()/step()
    virtual void scrub() {}
    // Raises the node's error as `outer` unless it is already a protocol
    // verdict the caller must see unchanged (BadAuthorization etc.).
    void fail_from_node(const std::string& from_id, const ErrorResponse& err, Errc outer);
    virtual Errc cancel_code() const { return Errc::cancelled; }

    Rng& rng_;
    struct InFlight {
        std::string node_id;
        MsgType req{};
        bool tracked = true;
    };
    // session id -> expectation; entries are erased as responses arrive,
    // which also makes duplicate deliveries no-ops
    std::map<SessionId, InFlight> inflight_;

private:
    Status status_ = Status::idle;
    Errc failure_code_ = Errc::internal;
    std::string failure_detail_;
    std::vector<std::string> trace_;
};

// ===== registration =====

struct RegistrationPlan {
    std::string username;
    Bytes password;
    Bytes payload; // what recovery must return
    GroupId group = GroupId::ristretto;
    std::vector<NodeAddress> committee; // assigned indices 1..n in order
    uint32_t threshold = 3;             // default t=3, n=5
    uint64_t directory_version = 1;
};

class RegisterSession final : public Session {
public:
    RegisterSession(RegistrationPlan plan, Rng& rng);

    const SigningKeypair& user_key() const { return key_; }
    const DirectoryEntry& published_entry() const { return entry_; }
    // true once s, the shares, and the password have been wiped
    bool sensitive_cleared() const;

private:
    std::vector<Outgoing> begin() override;
    std::vector<Outgoing> step(const std::string& from_id, MsgType req,
                               const Envelope& env) override;
    std::string waiting_on() const override;
    void scrub() override;

    RegistrationPlan plan_;
    SigningKeypair key_;
    DirectoryEntry entry_;
    std::vector<Share> shares_;
    Scalar secret_;
    Bytes backup_;
    size_t acks_needed_ = 0;
    size_t puts_needed_ = 0;
    bool publishing_ = false;
};

// ===== recovery =====

// what unpack_backup_payload yields is exactly what recovery returns
using RecoveredSecret = UnpackedBackup;

class RecoverSession final : public Session {
public:
    // Bootstrap nodes answer the directory lookup; the entry then names the
    // committee to query. exclude lists node ids not to contact (retry path
    // after a poisoned subset).
    RecoverSession(std::string username, Bytes password, const Group& g,
                   std::vector<NodeAddress> bootstrap, Rng& rng,
                   std::set<std::string> exclude = {});

    const RecoveredSecret& result() const { return result_; }
    bool sensitive_cleared() const;
    uint64_t epoch() const { return awaited_epoch_; } // valid once succeeded

private:
    std::vector<Outgoing> begin() override;
    std::vector<Outgoing> step(const std::string& from_id, MsgType req,
                               const Envelope& env) override;
    std::string waiting_on() const override;
    Errc cancel_code() const override;
    void scrub() override;

    std::vector<Outgoing> on_entry(const DirectoryEntry& entry);
    void try_finish();
    size_t recovery_inflight() const;

    std::string username_;
    Bytes password_;
    const Group& g_;
    std::vector<NodeAddress> bootstrap_;
    std::set<std::string> exclude_;

    size_t lookups_pending_ = 0;
    bool have_entry_ = false;
    DirectoryEntry entry_;

    BlindingState blinding_;
    bool epoch_set_ = false;
    uint64_t awaited_epoch_ = 0;
    uint32_t awaited_threshold_ = 0;
    std::vector<EvaluatedElement> evaluated_; // epoch-consistent, arrival order
    std::vector<Bytes> backups_;              // same order as evaluated_
    std::set<uint32_t> seen_indices_;

    RecoveredSecret result_;
};

// ===== rotation =====

struct RotationPlan {
    std::string username;
    SigningKeypair user_key;
    GroupId group = GroupId::ristretto;
    std::vector<NodeAddress> bootstrap;     // directory lookup targets
    std::vector<NodeAddress> new_committee; // assigned indices 1..m in order
    uint32_t new_threshold = 0;
    // optional: old-committee indices that contribute; default = the first
    // t_old+1 listed in the directory entry
    std::vector<uint32_t> contributors;
};

class RotateSession final : public Session {
public:
    RotateSession(RotationPlan plan, Rng& rng);

    uint64_t new_version() const { return directive_.directory_version; }
    uint64_t new_epoch() const { return new_epoch_; }
    const RotationDirective& directive() const { return directive_; }

private:
    std::vector<Outgoing> begin() override;
    std::vector<Outgoing> step(const std::string& from_id, MsgType req,
                               const Envelope& env) override;
    std::string waiting_on() const override;

    std::vector<Outgoing> on_entry(const DirectoryEntry& entry);
    std::vector<Outgoing> maybe_send_directives();
    std::vector<Outgoing> send_installs();
    std::vector<Outgoing> publish();
    std::vector<Outgoing> send_completes();

    enum class Phase { lookup, node_info, envelopes, installs, publishing, completing };

    RotationPlan plan_;
    Phase phase_ = Phase::lookup;
    size_t lookups_pending_ = 0;
    bool have_entry_ = false;
    DirectoryEntry entry_;

    std::map<std::string, BoxPublicKey> transport_keys_; // new committee node id -> key
    RotationDirective directive_;
    std::map<uint32_t, NodeAddress> old_by_index_;

    // per new index, sealed subshares keyed by contributor index
    std::map<uint32_t, std::map<uint32_t, Bytes>> collected_;
    std::set<uint32_t> envelopes_pending_; // contributor indices not yet heard from
    Bytes backup_;
    size_t installs_pending_ = 0;
    size_t puts_pending_ = 0;
    size_t completes_pending_ = 0;
    uint64_t new_epoch_ = 0;
};

} // namespace kintsugi
