#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kintsugi/bytes.hpp"
#include "kintsugi/errors.hpp"
#include "kintsugi/group.hpp"
#include "kintsugi/rng.hpp"
#include "kintsugi/signing.hpp"

namespace kintsugi {

inline constexpr uint8_t kProtocolVersion = 0x01;
inline constexpr size_t kMaxFrame = 1 << 20; // hard cap, frames above this abort the connection

using SessionId = std::array<uint8_t, 16>;

SessionId random_session_id(Rng& rng);

// Wire type bytes are part of the protocol; never renumber.
enum class MsgType : uint8_t {
    register_request = 0x01,
    register_ack = 0x02,
    recovery_request = 0x03,
    recovery_response = 0x04,
    refresh_directive = 0x05,
    refresh_envelopes = 0x06,
    refresh_install = 0x07,
    refresh_install_ack = 0x08,
    refresh_complete = 0x09,
    refresh_complete_ack = 0x0a,
    directory_put = 0x0b,
    directory_put_ack = 0x0c,
    directory_get = 0x0d,
    directory_get_response = 0x0e,
    node_info_request = 0x0f,
    node_info_response = 0x10,
    error_response = 0x11,
};

const char* msg_type_name(MsgType t);

// ===== canonical reader/writer =====

// Strict decoder: every violation reports the byte offset it was found at.
class Reader {
public:
    explicit Reader(ByteSpan in) : in_(in) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    Bytes blob(size_t max_len = kMaxFrame); // u32-LE length prefix
    std::string str(size_t max_len = kMaxFrame);

    template <size_t N> std::array<uint8_t, N> raw() {
        need(N);
        std::array<uint8_t, N> out;
        std::copy(in_.begin() + at_, in_.begin() + at_ + N, out.begin());
        at_ += N;
        return out;
    }

    size_t offset() const { return at_; }
    void finish() const; // rejects trailing bytes

private:
    void need(size_t n);
    ByteSpan in_;
    size_t at_ = 0;
};

void put_u16(Bytes& out, uint16_t v);
void put_blob(Bytes& out, ByteSpan b);
void put_str(Bytes& out, const std::string& s);

// ===== directory records =====

struct CommitteeMember {
    std::string node_id;
    std::string address;
    uint32_t index = 0;

    bool operator==(const CommitteeMember&) const = default;
};

struct DirectoryEntry {
    std::string username;
    PublicKey user_pubkey{};
    uint64_t version = 0;
    std::vector<CommitteeMember> committee;
    uint32_t threshold = 0;
    Signature signature{};

    // canonical encoding of every field above the signature; this is what gets signed
    Bytes signed_fields() const;
    void sign(const SecretKey& sk);
    bool verify() const; // under user_pubkey

    Bytes encode() const;
    static DirectoryEntry decode(Reader& r);

    bool operator==(const DirectoryEntry&) const = default;
};

// ===== rotation =====

// Committee member plus the transport key old nodes seal subshares to.
struct RotationMember {
    std::string node_id;
    std::string address;
    uint32_t index = 0;
    BoxPublicKey transport_pk{};

    bool operator==(const RotationMember&) const = default;
};

struct RotationDirective {
    std::string username;
    uint8_t group_id = 0;
    std::vector<CommitteeMember> old_committee;
    std::vector<uint32_t> contributors; // exactly t_old+1 old indices
    std::vector<RotationMember> new_committee;
    uint32_t new_threshold = 0;
    uint64_t directory_version = 0; // version the updated entry will carry
    Signature signature{};

    Bytes signed_fields() const;
    void sign(const SecretKey& sk);
    bool verify(const PublicKey& pk) const;

    Bytes encode() const;
    static RotationDirective decode(Reader& r);

    bool operator==(const RotationDirective&) const = default;
};

// ===== messages =====

struct RegisterRequest {
    std::string username;
    PublicKey user_pubkey{};
    uint8_t group_id = 0;
    uint32_t committee_n = 0;
    uint32_t threshold = 0;
    uint32_t index = 0; // recipient's share index
    uint64_t epoch = 0;
    uint64_t directory_version = 0; // version of the entry published right after
    Bytes share_value; // encoded scalar
    Bytes backup;      // EncryptedBackup wire form
    bool has_resign = false;
    Signature resign{}; // authorizes replacing an existing record

    Bytes auth_fields() const; // everything the re-registration signature covers
    bool operator==(const RegisterRequest&) const = default;
};

struct RegisterAck {
    uint32_t index = 0;
    uint64_t epoch = 0;
    bool operator==(const RegisterAck&) const = default;
};

struct RecoveryRequest {
    std::string username;
    Bytes blinded; // encoded element r_i * P
    bool operator==(const RecoveryRequest&) const = default;
};

struct RecoveryResponse {
    uint32_t index = 0;
    uint64_t epoch = 0;
    uint32_t threshold = 0;
    Bytes evaluated; // encoded element s_i * r_i * P
    Bytes backup;    // EncryptedBackup wire form
    bool operator==(const RecoveryResponse&) const = default;
};

struct RefreshDirective {
    RotationDirective directive;
    bool operator==(const RefreshDirective&) const = default;
};

struct SealedSubshare {
    uint32_t peer_index = 0; // recipient index in envelopes-from-old; sender index in installs
    Bytes sealed;
    bool operator==(const SealedSubshare&) const = default;
};

struct RefreshEnvelopes {
    uint32_t from_index = 0;
    std::vector<SealedSubshare> envelopes; // peer_index = destination new-committee index
    Bytes backup;
    bool operator==(const RefreshEnvelopes&) const = default;
};

struct RefreshInstall {
    RotationDirective directive;
    PublicKey user_pubkey{}; // verification key for the directive; TOFU-pinned by fresh members
    std::vector<SealedSubshare> envelopes; // peer_index = contributing old-committee index
    Bytes backup;
    bool operator==(const RefreshInstall&) const = default;
};

struct RefreshInstallAck {
    uint32_t index = 0;
    uint64_t epoch = 0;
    bool operator==(const RefreshInstallAck&) const = default;
};

struct RefreshComplete {
    std::string username;
    uint64_t directory_version = 0;
    Signature signature{}; // by the user key; departing nodes delete on receipt

    Bytes signed_fields() const;
    void sign(const SecretKey& sk);
    bool verify(const PublicKey& pk) const;
    bool operator==(const RefreshComplete&) const = default;
};

struct RefreshCompleteAck {
    uint32_t index = 0;
    bool operator==(const RefreshCompleteAck&) const = default;
};

struct DirectoryPut {
    DirectoryEntry entry;
    bool operator==(const DirectoryPut&) const = default;
};

struct DirectoryPutAck {
    uint64_t version = 0;
    bool operator==(const DirectoryPutAck&) const = default;
};

struct DirectoryGet {
    std::string username;
    bool operator==(const DirectoryGet&) const = default;
};

struct DirectoryGetResponse {
    bool present = false;
    DirectoryEntry entry;
    bool operator==(const DirectoryGetResponse&) const = default;
};

struct NodeInfoRequest {
    bool operator==(const NodeInfoRequest&) const = default;
};

struct NodeInfoResponse {
    std::string node_id;
    BoxPublicKey transport_pk{};
    bool operator==(const NodeInfoResponse&) const = default;
};

struct ErrorResponse {
    uint16_t code = 0; // Errc numeric value
    std::string message;

    Errc errc() const { return static_cast<Errc>(code); }
    bool operator==(const ErrorResponse&) const = default;
};

using Message =
    std::variant<RegisterRequest, RegisterAck, RecoveryRequest, RecoveryResponse, RefreshDirective,
                 RefreshEnvelopes, RefreshInstall, RefreshInstallAck, RefreshComplete,
                 RefreshCompleteAck, DirectoryPut, DirectoryPutAck, DirectoryGet,
                 DirectoryGetResponse, NodeInfoRequest, NodeInfoResponse, ErrorResponse>;

MsgType message_type(const Message& m);

struct Envelope {
    MsgType type{};
    SessionId session{};
    Message body;
};

// version || type || session id || payload
Bytes encode_envelope(const Envelope& env);
Envelope decode_envelope(ByteSpan in); // throws MalformedMessage with offset

Bytes make_envelope(const Message& body, const SessionId& session);

// Sealed-envelope plaintext for one refresh subshare.
struct RefreshSubshare; // sharing.hpp
Bytes encode_subshare(const RefreshSubshare& s);
RefreshSubshare decode_subshare(ByteSpan in);

} // namespace kintsugi
