#include "kintsugi/wire.hpp"

#include "kintsugi/hash.hpp"
#include "kintsugi/sharing.hpp"

namespace kintsugi {

SessionId random_session_id(Rng& rng) {
    SessionId id{};
    rng.fill(id);
    return id;
}

const char* msg_type_name(MsgType t) {
    switch (t) {
    case MsgType::register_request: return "RegisterRequest";
    case MsgType::register_ack: return "RegisterAck";
    case MsgType::recovery_request: return "RecoveryRequest";
    case MsgType::recovery_response: return "RecoveryResponse";
    case MsgType::refresh_directive: return "RefreshDirective";
    case MsgType::refresh_envelopes: return "RefreshEnvelopes";
    case MsgType::refresh_install: return "RefreshInstall";
    case MsgType::refresh_install_ack: return "RefreshInstallAck";
    case MsgType::refresh_complete: return "RefreshComplete";
    case MsgType::refresh_complete_ack: return "RefreshCompleteAck";
    case MsgType::directory_put: return "DirectoryPut";
    case MsgType::directory_put_ack: return "DirectoryPutAck";
    case MsgType::directory_get: return "DirectoryGet";
    case MsgType::directory_get_response: return "DirectoryGetResponse";
    case MsgType::node_info_request: return "NodeInfoRequest";
    case MsgType::node_info_response: return "NodeInfoResponse";
    case MsgType::error_response: return "ErrorResponse";
    }
    return "Unknown";
}

// ===== reader/writer =====

void Reader::need(size_t n) {
    if (at_ + n > in_.size())
        fail(Errc::malformed_message,
             "truncated: need " + std::to_string(n) + " bytes at offset " + std::to_string(at_));
}

uint8_t Reader::u8() {
    need(1);
    return in_[at_++];
}

uint16_t Reader::u16() {
    need(2);
    uint16_t v = uint16_t(in_[at_]) | uint16_t(in_[at_ + 1]) << 8;
    at_ += 2;
    return v;
}

uint32_t Reader::u32() {
    need(4);
    uint32_t v = load_le32(in_.data() + at_);
    at_ += 4;
    return v;
}

uint64_t Reader::u64() {
    need(8);
    uint64_t v = load_le64(in_.data() + at_);
    at_ += 8;
    return v;
}

Bytes Reader::blob(size_t max_len) {
    size_t len_at = at_;
    uint32_t len = u32();
    if (len > max_len)
        fail(Errc::malformed_message,
             "length " + std::to_string(len) + " exceeds cap at offset " + std::to_string(len_at));
    need(len);
    Bytes out(in_.begin() + at_, in_.begin() + at_ + len);
    at_ += len;
    return out;
}

std::string Reader::str(size_t max_len) {
    Bytes b = blob(max_len);
    return std::string(b.begin(), b.end());
}

void Reader::finish() const {
    if (at_ != in_.size())
        fail(Errc::malformed_message,
             std::to_string(in_.size() - at_) + " trailing bytes at offset " + std::to_string(at_));
}

void put_u16(Bytes& out, uint16_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
}

void put_blob(Bytes& out, ByteSpan b) {
    append_le32(out, uint32_t(b.size()));
    append(out, b);
}

void put_str(Bytes& out, const std::string& s) {
    append_le32(out, uint32_t(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

namespace {

template <size_t N> void put_raw(Bytes& out, const std::array<uint8_t, N>& a) {
    out.insert(out.end(), a.begin(), a.end());
}

constexpr size_t kMaxCommittee = 1024;

void put_member(Bytes& out, const CommitteeMember& m) {
    put_str(out, m.node_id);
    put_str(out, m.address);
    append_le32(out, m.index);
}

CommitteeMember read_member(Reader& r) {
    CommitteeMember m;
    m.node_id = r.str();
    m.address = r.str();
    m.index = r.u32();
    return m;
}

void put_rotation_member(Bytes& out, const RotationMember& m) {
    put_str(out, m.node_id);
    put_str(out, m.address);
    append_le32(out, m.index);
    put_raw(out, m.transport_pk);
}

RotationMember read_rotation_member(Reader& r) {
    RotationMember m;
    m.node_id = r.str();
    m.address = r.str();
    m.index = r.u32();
    m.transport_pk = r.raw<32>();
    return m;
}

uint32_t read_count(Reader& r, size_t cap, const char* what) {
    size_t at = r.offset();
    uint32_t n = r.u32();
    if (n > cap)
        fail(Errc::malformed_message, std::string(what) + " count " + std::to_string(n) +
                                          " exceeds cap at offset " + std::to_string(at));
    return n;
}

void put_sealed(Bytes& out, const std::vector<SealedSubshare>& envs) {
    append_le32(out, uint32_t(envs.size()));
    for (const auto& e : envs) {
        append_le32(out, e.peer_index);
        put_blob(out, e.sealed);
    }
}

std::vector<SealedSubshare> read_sealed(Reader& r) {
    uint32_t n = read_count(r, kMaxCommittee, "envelope");
    std::vector<SealedSubshare> out(n);
    for (auto& e : out) {
        e.peer_index = r.u32();
        e.sealed = r.blob();
    }
    return out;
}

} // namespace

// ===== directory entry =====

Bytes DirectoryEntry::signed_fields() const {
    Bytes out;
    put_str(out, username);
    put_raw(out, user_pubkey);
    append_le64(out, version);
    append_le32(out, uint32_t(committee.size()));
    for (const auto& m : committee) put_member(out, m);
    append_le32(out, threshold);
    return out;
}

void DirectoryEntry::sign(const SecretKey& sk) {
    signature = sign_message(sk, kSigDirectoryEntry, {signed_fields()});
}

bool DirectoryEntry::verify() const {
    return verify_message(user_pubkey, kSigDirectoryEntry, {signed_fields()}, signature);
}

Bytes DirectoryEntry::encode() const {
    Bytes out = signed_fields();
    put_raw(out, signature);
    return out;
}

DirectoryEntry DirectoryEntry::decode(Reader& r) {
    DirectoryEntry e;
    e.username = r.str();
    e.user_pubkey = r.raw<32>();
    e.version = r.u64();
    uint32_t n = read_count(r, kMaxCommittee, "committee");
    e.committee.reserve(n);
    for (uint32_t i = 0; i < n; ++i) e.committee.push_back(read_member(r));
    e.threshold = r.u32();
    e.signature = r.raw<64>();
    return e;
}

// ===== rotation directive =====

Bytes RotationDirective::signed_fields() const {
    Bytes out;
    put_str(out, username);
    out.push_back(group_id);
    append_le32(out, uint32_t(old_committee.size()));
    for (const auto& m : old_committee) put_member(out, m);
    append_le32(out, uint32_t(contributors.size()));
    for (uint32_t c : contributors) append_le32(out, c);
    append_le32(out, uint32_t(new_committee.size()));
    for (const auto& m : new_committee) put_rotation_member(out, m);
    append_le32(out, new_threshold);
    append_le64(out, directory_version);
    return out;
}

void RotationDirective::sign(const SecretKey& sk) {
    signature = sign_message(sk, kSigDirective, {signed_fields()});
}

bool RotationDirective::verify(const PublicKey& pk) const {
    return verify_message(pk, kSigDirective, {signed_fields()}, signature);
}

Bytes RotationDirective::encode() const {
    Bytes out = signed_fields();
    put_raw(out, signature);
    return out;
}

RotationDirective RotationDirective::decode(Reader& r) {
    RotationDirective d;
    d.username = r.str();
    d.group_id = r.u8();
    uint32_t n_old = read_count(r, kMaxCommittee, "old committee");
    d.old_committee.reserve(n_old);
    for (uint32_t i = 0; i < n_old; ++i) d.old_committee.push_back(read_member(r));
    uint32_t n_con = read_count(r, kMaxCommittee, "contributor");
    d.contributors.reserve(n_con);
    for (uint32_t i = 0; i < n_con; ++i) d.contributors.push_back(r.u32());
    uint32_t n_new = read_count(r, kMaxCommittee, "new committee");
    d.new_committee.reserve(n_new);
    for (uint32_t i = 0; i < n_new; ++i) d.new_committee.push_back(read_rotation_member(r));
    d.new_threshold = r.u32();
    d.directory_version = r.u64();
    d.signature = r.raw<64>();
    return d;
}

// ===== refresh complete =====

Bytes RefreshComplete::signed_fields() const {
    Bytes out;
    put_str(out, username);
    append_le64(out, directory_version);
    return out;
}

void RefreshComplete::sign(const SecretKey& sk) {
    signature = sign_message(sk, kSigComplete, {signed_fields()});
}

bool RefreshComplete::verify(const PublicKey& pk) const {
    return verify_message(pk, kSigComplete, {signed_fields()}, signature);
}

// ===== register request authorization =====

Bytes RegisterRequest::auth_fields() const {
    Bytes out;
    put_str(out, username);
    put_raw(out, user_pubkey);
    out.push_back(group_id);
    append_le32(out, committee_n);
    append_le32(out, threshold);
    append_le32(out, index);
    append_le64(out, epoch);
    append_le64(out, directory_version);
    put_blob(out, share_value);
    put_blob(out, backup);
    return out;
}

// ===== per-message payload codecs =====

namespace {

Bytes enc(const RegisterRequest& m) {
    Bytes out = m.auth_fields();
    out.push_back(m.has_resign ? 1 : 0);
    if (m.has_resign) put_raw(out, m.resign);
    return out;
}

RegisterRequest dec_register_request(Reader& r) {
    RegisterRequest m;
    m.username = r.str();
    m.user_pubkey = r.raw<32>();
    m.group_id = r.u8();
    m.committee_n = r.u32();
    m.threshold = r.u32();
    m.index = r.u32();
    m.epoch = r.u64();
    m.directory_version = r.u64();
    m.share_value = r.blob();
    m.backup = r.blob();
    size_t flag_at = r.offset();
    uint8_t flag = r.u8();
    if (flag > 1)
        fail(Errc::malformed_message, "bad signature flag at offset " + std::to_string(flag_at));
    m.has_resign = flag == 1;
    if (m.has_resign) m.resign = r.raw<64>();
    return m;
}

Bytes enc(const RegisterAck& m) {
    Bytes out;
    append_le32(out, m.index);
    append_le64(out, m.epoch);
    return out;
}

Bytes enc(const RecoveryRequest& m) {
    Bytes out;
    put_str(out, m.username);
    put_blob(out, m.blinded);
    return out;
}

Bytes enc(const RecoveryResponse& m) {
    Bytes out;
    append_le32(out, m.index);
    append_le64(out, m.epoch);
    append_le32(out, m.threshold);
    put_blob(out, m.evaluated);
    put_blob(out, m.backup);
    return out;
}

Bytes enc(const RefreshDirective& m) { return m.directive.encode(); }

Bytes enc(const RefreshEnvelopes& m) {
    Bytes out;
    append_le32(out, m.from_index);
    put_sealed(out, m.envelopes);
    put_blob(out, m.backup);
    return out;
}

Bytes enc(const RefreshInstall& m) {
    Bytes out;
    put_blob(out, m.directive.encode());
    put_raw(out, m.user_pubkey);
    put_sealed(out, m.envelopes);
    put_blob(out, m.backup);
    return out;
}

Bytes enc(const RefreshInstallAck& m) {
    Bytes out;
    append_le32(out, m.index);
    append_le64(out, m.epoch);
    return out;
}

Bytes enc(const RefreshComplete& m) {
    Bytes out = m.signed_fields();
    put_raw(out, m.signature);
    return out;
}

Bytes enc(const RefreshCompleteAck& m) {
    Bytes out;
    append_le32(out, m.index);
    return out;
}

Bytes enc(const DirectoryPut& m) { return m.entry.encode(); }

Bytes enc(const DirectoryPutAck& m) {
    Bytes out;
    append_le64(out, m.version);
    return out;
}

Bytes enc(const DirectoryGet& m) {
    Bytes out;
    put_str(out, m.username);
    return out;
}

Bytes enc(const DirectoryGetResponse& m) {
    Bytes out;
    out.push_back(m.present ? 1 : 0);
    if (m.present) append(out, m.entry.encode());
    return out;
}

Bytes enc(const NodeInfoRequest&) { return {}; }

Bytes enc(const NodeInfoResponse& m) {
    Bytes out;
    put_str(out, m.node_id);
    put_raw(out, m.transport_pk);
    return out;
}

Bytes enc(const ErrorResponse& m) {
    Bytes out;
    put_u16(out, m.code);
    put_str(out, m.message);
    return out;
}

Message decode_payload(MsgType type, ByteSpan payload) {
    Reader r(payload);
    Message out;
    switch (type) {
    case MsgType::register_request: out = dec_register_request(r); break;
    case MsgType::register_ack: {
        RegisterAck m;
        m.index = r.u32();
        m.epoch = r.u64();
        out = m;
        break;
    }
    case MsgType::recovery_request: {
        RecoveryRequest m;
        m.username = r.str();
        m.blinded = r.blob();
        out = m;
        break;
    }
    case MsgType::recovery_response: {
        RecoveryResponse m;
        m.index = r.u32();
        m.epoch = r.u64();
        m.threshold = r.u32();
        m.evaluated = r.blob();
        m.backup = r.blob();
        out = m;
        break;
    }
    case MsgType::refresh_directive: out = RefreshDirective{RotationDirective::decode(r)}; break;
    case MsgType::refresh_envelopes: {
        RefreshEnvelopes m;
        m.from_index = r.u32();
        m.envelopes = read_sealed(r);
        m.backup = r.blob();
        out = m;
        break;
    }
    case MsgType::refresh_install: {
        RefreshInstall m;
        Bytes dbytes = r.blob();
        Reader dr(dbytes);
        m.directive = RotationDirective::decode(dr);
        dr.finish();
        m.user_pubkey = r.raw<32>();
        m.envelopes = read_sealed(r);
        m.backup = r.blob();
        out = m;
        break;
    }
    case MsgType::refresh_install_ack: {
        RefreshInstallAck m;
        m.index = r.u32();
        m.epoch = r.u64();
        out = m;
        break;
    }
    case MsgType::refresh_complete: {
        RefreshComplete m;
        m.username = r.str();
        m.directory_version = r.u64();
        m.signature = r.raw<64>();
        out = m;
        break;
    }
    case MsgType::refresh_complete_ack: {
        RefreshCompleteAck m;
        m.index = r.u32();
        out = m;
        break;
    }
    case MsgType::directory_put: out = DirectoryPut{DirectoryEntry::decode(r)}; break;
    case MsgType::directory_put_ack: {
        DirectoryPutAck m;
        m.version = r.u64();
        out = m;
        break;
    }
    case MsgType::directory_get: {
        DirectoryGet m;
        m.username = r.str();
        out = m;
        break;
    }
    case MsgType::directory_get_response: {
        DirectoryGetResponse m;
        size_t flag_at = r.offset();
        uint8_t flag = r.u8();
        if (flag > 1)
            fail(Errc::malformed_message, "bad presence flag at offset " + std::to_string(flag_at));
        m.present = flag == 1;
        if (m.present) m.entry = DirectoryEntry::decode(r);
        out = m;
        break;
    }
    case MsgType::node_info_request: out = NodeInfoRequest{}; break;
    case MsgType::node_info_response: {
        NodeInfoResponse m;
        m.node_id = r.str();
        m.transport_pk = r.raw<32>();
        out = m;
        break;
    }
    case MsgType::error_response: {
        ErrorResponse m;
        m.code = r.u16();
        m.message = r.str();
        out = m;
        break;
    }
    default: fail(Errc::malformed_message, "unknown message type"); // unreachable, checked by caller
    }
    r.finish();
    return out;
}

} // namespace

MsgType message_type(const Message& m) {
    return std::visit(
        [](const auto& v) -> MsgType {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, RegisterRequest>) return MsgType::register_request;
            else if constexpr (std::is_same_v<T, RegisterAck>) return MsgType::register_ack;
            else if constexpr (std::is_same_v<T, RecoveryRequest>) return MsgType::recovery_request;
            else if constexpr (std::is_same_v<T, RecoveryResponse>) return MsgType::recovery_response;
            else if constexpr (std::is_same_v<T, RefreshDirective>) return MsgType::refresh_directive;
            else if constexpr (std::is_same_v<T, RefreshEnvelopes>) return MsgType::refresh_envelopes;
            else if constexpr (std::is_same_v<T, RefreshInstall>) return MsgType::refresh_install;
            else if constexpr (std::is_same_v<T, RefreshInstallAck>)
                return MsgType::refresh_install_ack;
            else if constexpr (std::is_same_v<T, RefreshComplete>) return MsgType::refresh_complete;
            else if constexpr (std::is_same_v<T, RefreshCompleteAck>)
                return MsgType::refresh_complete_ack;
            else if constexpr (std::is_same_v<T, DirectoryPut>) return MsgType::directory_put;
            else if constexpr (std::is_same_v<T, DirectoryPutAck>) return MsgType::directory_put_ack;
            else if constexpr (std::is_same_v<T, DirectoryGet>) return MsgType::directory_get;
            else if constexpr (std::is_same_v<T, DirectoryGetResponse>)
                return MsgType::directory_get_response;
            else if constexpr (std::is_same_v<T, NodeInfoRequest>) return MsgType::node_info_request;
            else if constexpr (std::is_same_v<T, NodeInfoResponse>)
                return MsgType::node_info_response;
            else return MsgType::error_response;
        },
        m);
}

Bytes encode_envelope(const Envelope& env) {
    Bytes payload = std::visit([](const auto& v) { return enc(v); }, env.body);
    Bytes out;
    out.reserve(1 + 1 + env.session.size() + payload.size());
    out.push_back(kProtocolVersion);
    out.push_back(uint8_t(env.type));
    out.insert(out.end(), env.session.begin(), env.session.end());
    append(out, payload);
    return out;
}

Envelope decode_envelope(ByteSpan in) {
    // header checks come before any payload parsing
    if (in.size() < 18) fail(Errc::malformed_message, "envelope shorter than its header");
    if (in[0] != kProtocolVersion)
        fail(Errc::malformed_message, "unknown protocol version at offset 0");
    uint8_t t = in[1];
    if (t < uint8_t(MsgType::register_request) || t > uint8_t(MsgType::error_response))
        fail(Errc::malformed_message, "unknown message type at offset 1");
    Envelope env;
    env.type = MsgType(t);
    std::copy(in.begin() + 2, in.begin() + 18, env.session.begin());
    env.body = decode_payload(env.type, in.subspan(18));
    return env;
}

Bytes make_envelope(const Message& body, const SessionId& session) {
    return encode_envelope(Envelope{message_type(body), session, body});
}

Bytes encode_subshare(const RefreshSubshare& s) {
    Bytes out;
    append_le32(out, s.from_index);
    append_le32(out, s.to_index);
    append_le64(out, s.old_epoch);
    append_le64(out, s.new_epoch);
    append_le32(out, s.new_threshold);
    put_blob(out, s.value.bytes());
    return out;
}

RefreshSubshare decode_subshare(ByteSpan in) {
    Reader r(in);
    RefreshSubshare s;
    s.from_index = r.u32();
    s.to_index = r.u32();
    s.old_epoch = r.u64();
    s.new_epoch = r.u64();
    s.new_threshold = r.u32();
    Bytes v = r.blob(32);
    if (v.size() != 8 && v.size() != 32)
        fail(Errc::malformed_message, "bad scalar width " + std::to_string(v.size()));
    s.value.width = uint8_t(v.size());
    std::copy(v.begin(), v.end(), s.value.data.begin());
    r.finish();
    return s;
}

} // namespace kintsugi
