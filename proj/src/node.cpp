#include "kintsugi/node.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "kintsugi/hash.hpp"

namespace kintsugi {

namespace {

constexpr std::string_view kSnapshotMagic = "KSGNODE1";
constexpr size_t kResponseCacheCap = 8192;

template <class... Ts> struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

// Structural checks shared by the contributor and installer paths. The
// signature proves the user meant it; this proves it can actually work.
void check_directive(const RotationDirective& d) {
    if (d.username.empty()) fail(Errc::malformed_message, "directive without username");
    group_for(static_cast<GroupId>(d.group_id)); // rejects unknown ids
    if (d.contributors.empty())
        fail(Errc::insufficient_contributors, "directive with an empty contributor set");
    std::set<uint32_t> contrib(d.contributors.begin(), d.contributors.end());
    if (contrib.size() != d.contributors.size() || contrib.count(0) != 0)
        fail(Errc::duplicate_index, "contributor indices must be distinct and nonzero");
    std::set<uint32_t> old_indices;
    for (const CommitteeMember& mem : d.old_committee) old_indices.insert(mem.index);
    for (uint32_t c : d.contributors)
        if (old_indices.count(c) == 0)
            fail(Errc::malformed_message, "contributor index missing from the old committee");
    if (d.new_committee.size() < static_cast<size_t>(d.new_threshold) + 1)
        fail(Errc::malformed_message, "new committee smaller than new_threshold+1");
    std::set<uint32_t> new_indices;
    std::set<std::string> new_ids;
    for (const RotationMember& mem : d.new_committee) {
        if (mem.index == 0 || !new_indices.insert(mem.index).second)
            fail(Errc::duplicate_index, "new committee indices must be distinct and nonzero");
        if (mem.node_id.empty() || !new_ids.insert(mem.node_id).second)
            fail(Errc::malformed_message, "new committee node ids must be distinct and nonempty");
    }
}

} // namespace

// ===== rate limiter =====

bool RateLimiter::admit(const std::string& source, uint64_t now) {
    auto [it, fresh] = buckets_.try_emplace(source, Bucket{static_cast<double>(capacity_), now});
    Bucket& b = it->second;
    if (!fresh && now > b.last)
        b.tokens = std::min(static_cast<double>(capacity_),
                            b.tokens + static_cast<double>(now - b.last) * refill_per_sec_);
    b.last = std::max(b.last, now);
    if (b.tokens < 1.0) return false;
    b.tokens -= 1.0;
    return true;
}

// ===== node =====

Node::Node(NodeConfig cfg, Clock& clock, Rng& rng)
    : cfg_(std::move(cfg)),
      clock_(clock),
      rng_(rng),
      limiter_(cfg_.rate_capacity, cfg_.rate_refill_per_hour / 3600.0) {
    if (cfg_.node_id.empty()) fail(Errc::internal, "node requires a node_id");
    load_or_init(rng);
}

const UserRecord* Node::record(const std::string& username) const {
    auto it = records_.find(username);
    return it == records_.end() ? nullptr : &it->second;
}

Bytes Node::handle(const std::string& source, ByteSpan envelope_bytes) {
    Envelope env;
    try {
        env = decode_envelope(envelope_bytes);
    } catch (const Error& e) {
        // Header may be unusable; salvage the session id when present so the
        // sender can still correlate the complaint. Never cached.
        SessionId session{};
        if (envelope_bytes.size() >= 2 + session.size())
            std::copy(envelope_bytes.begin() + 2, envelope_bytes.begin() + 2 + session.size(),
                      session.begin());
        return make_envelope(ErrorResponse{static_cast<uint16_t>(e.code()), e.what()}, session);
    }

    // Duplicate deliveries replay the recorded response without touching
    // state (in particular, without consuming rate-limit tokens).
    if (auto it = response_cache_.find(env.session); it != response_cache_.end()) return it->second;

    Message reply;
    try {
        reply = dispatch(source, env);
    } catch (const Error& e) {
        reply = ErrorResponse{static_cast<uint16_t>(e.code()), e.what()};
    } catch (const std::exception& e) {
        reply = ErrorResponse{static_cast<uint16_t>(Errc::internal),
                              std::string("Internal: ") + e.what()};
    }
    if (dirty_) {
        persist();
        dirty_ = false;
    }

    Bytes out = make_envelope(reply, env.session);
    response_cache_.emplace(env.session, out);
    response_order_.push_back(env.session);
    while (response_order_.size() > kResponseCacheCap) {
        response_cache_.erase(response_order_.front());
        response_order_.pop_front();
    }
    return out;
}

Message Node::dispatch(const std::string& source, const Envelope& env) {
    return std::visit(
        overloaded{
            [&](const RegisterRequest& m) { return on_register(m); },
            [&](const RecoveryRequest& m) { return on_recovery(source, m); },
            [&](const RefreshDirective& m) { return on_refresh_directive(m); },
            [&](const RefreshInstall& m) { return on_refresh_install(m); },
            [&](const RefreshComplete& m) { return on_refresh_complete(m); },
            [&](const DirectoryPut& m) { return on_directory_put(m); },
            [&](const DirectoryGet& m) { return on_directory_get(m); },
            [&](const NodeInfoRequest&) -> Message {
                return NodeInfoResponse{cfg_.node_id, transport_.pk};
            },
            [&](const auto&) -> Message {
                fail(Errc::malformed_message,
                     std::string("nodes do not accept ") + std::string(msg_type_name(env.type)));
            },
        },
        env.body);
}

Message Node::on_register(const RegisterRequest& m) {
    if (m.username.empty()) fail(Errc::malformed_message, "empty username");
    if (m.index == 0) fail(Errc::duplicate_index, "index 0 is reserved for the secret");
    if (m.committee_n < m.threshold + 1)
        fail(Errc::malformed_message, "committee smaller than threshold+1");
    const Group& g = group_for(static_cast<GroupId>(m.group_id));
    Scalar value = g.decode_scalar(m.share_value);
    EncryptedBackup::decode(m.backup); // shape check only; stored as received

    auto it = records_.find(m.username);
    if (it != records_.end()) {
        // Re-registration: only the pinned key may replace a live record, and
        // it must move the directory version forward so captured requests
        // cannot be replayed later.
        if (!m.has_resign) fail(Errc::duplicate_user, "username already registered here");
        if (m.user_pubkey != it->second.user_pubkey)
            fail(Errc::bad_authorization, "re-registration must keep the pinned user key");
        if (!verify_message(it->second.user_pubkey, kSigRegister, {m.auth_fields()}, m.resign))
            fail(Errc::bad_authorization, "re-registration signature check failed");
        if (m.directory_version <= it->second.directory_version)
            fail(Errc::bad_authorization, "re-registration does not advance the directory version");
    }

    records_.insert_or_assign(m.username, UserRecord{m.username, m.group_id,
                                                     Share{m.index, value, m.epoch, m.threshold},
                                                     m.backup, m.committee_n, m.user_pubkey,
                                                     m.directory_version});
    dirty_ = true;
    return RegisterAck{m.index, m.epoch};
}

Message Node::on_recovery(const std::string& source, const RecoveryRequest& m) {
    // The token is spent before the lookup so unknown-user probes pay the
    // same price as real guesses.
    if (!limiter_.admit(source, clock_.now()))
        fail(Errc::rate_limited, "recovery budget exhausted for " + source);
    auto it = records_.find(m.username);
    if (it == records_.end()) fail(Errc::unknown_user, "no share stored for this username");
    const UserRecord& rec = it->second;
    const Group& g = group_for(static_cast<GroupId>(rec.group_id));
    BlindedElement blinded{rec.share.index, g.decode_element(m.blinded)};
    EvaluatedElement ev = evaluate(g, rec.share, blinded);
    return RecoveryResponse{rec.share.index, rec.share.epoch, rec.share.threshold,
                            g.encode_element(ev.element), rec.backup};
}

Message Node::on_refresh_directive(const RefreshDirective& m) {
    const RotationDirective& d = m.directive;
    auto it = records_.find(d.username);
    if (it == records_.end()) fail(Errc::unknown_user, "no share stored for this username");
    const UserRecord& rec = it->second;
    if (!d.verify(rec.user_pubkey))
        fail(Errc::bad_authorization, "directive not signed by the pinned user key");
    check_directive(d);
    if (d.group_id != rec.group_id)
        fail(Errc::malformed_message, "directive group does not match the stored share");
    if (d.directory_version <= rec.directory_version)
        fail(Errc::bad_authorization, "directive does not advance the directory version");
    if (d.contributors.size() != static_cast<size_t>(rec.share.threshold) + 1)
        fail(Errc::insufficient_contributors, "contributor set must hold exactly t_old+1 indices");
    if (std::find(d.contributors.begin(), d.contributors.end(), rec.share.index) ==
        d.contributors.end())
        fail(Errc::bad_authorization, "this node is not in the contributor set");

    const Group& g = group_for(static_cast<GroupId>(rec.group_id));
    std::vector<uint32_t> new_indices;
    new_indices.reserve(d.new_committee.size());
    for (const RotationMember& mem : d.new_committee) new_indices.push_back(mem.index);

    std::vector<RefreshSubshare> subs =
        make_refresh_subshares(g, rec.share, d.new_threshold, new_indices, rng_);
    RefreshEnvelopes out{rec.share.index, {}, rec.backup};
    out.envelopes.reserve(subs.size());
    for (size_t j = 0; j < subs.size(); ++j) {
        Bytes plaintext = encode_subshare(subs[j]);
        out.envelopes.push_back(
            SealedSubshare{subs[j].to_index, seal_to(d.new_committee[j].transport_pk, plaintext, rng_)});
        wipe(plaintext);
    }
    // The old share stays until the signed completion arrives; a failed
    // rotation must leave recovery working.
    return out;
}

Message Node::on_refresh_install(const RefreshInstall& m) {
    const RotationDirective& d = m.directive;
    check_directive(d);
    const RotationMember* me = nullptr;
    for (const RotationMember& mem : d.new_committee)
        if (mem.node_id == cfg_.node_id) me = &mem;
    if (me == nullptr) fail(Errc::bad_authorization, "this node is not in the new committee");

    // Authorization key precedence: a live record pins hardest, then the
    // local directory replica, then first use.
    auto it = records_.find(d.username);
    PublicKey auth_key = m.user_pubkey;
    if (it != records_.end()) {
        auth_key = it->second.user_pubkey;
    } else if (auto pin = directory_.pins.find(d.username); pin != directory_.pins.end()) {
        if (pin->second.state == PinState::forked)
            fail(Errc::key_mismatch, "username is forked in the local directory replica");
        auth_key = pin->second.key;
    }
    if (m.user_pubkey != auth_key)
        fail(Errc::bad_authorization, "install key does not match the pinned user key");
    if (!d.verify(auth_key))
        fail(Errc::bad_authorization, "directive not signed by the pinned user key");
    if (it != records_.end() && d.directory_version < it->second.directory_version)
        fail(Errc::bad_authorization, "install does not advance the directory version");

    EncryptedBackup::decode(m.backup); // shape check only; stored as received

    std::vector<RefreshSubshare> subs;
    subs.reserve(m.envelopes.size());
    for (const SealedSubshare& env : m.envelopes) {
        Bytes plaintext = open_sealed(transport_, env.sealed);
        RefreshSubshare ss = decode_subshare(plaintext);
        wipe(plaintext);
        if (ss.from_index != env.peer_index)
            fail(Errc::misaddressed_subshare, "envelope sender label does not match its subshare");
        subs.push_back(ss);
    }
    const Group& g = group_for(static_cast<GroupId>(d.group_id));
    Share fresh = combine_subshares(g, me->index, subs, d.contributors);
    if (fresh.threshold != d.new_threshold)
        fail(Errc::mixed_epoch, "subshare threshold disagrees with the directive");

    if (it != records_.end() && d.directory_version == it->second.directory_version) {
        // Same rotation delivered twice with a fresh session id. Accept only
        // an exact repeat of what is already installed.
        if (fresh == it->second.share && m.backup == it->second.backup)
            return RefreshInstallAck{me->index, fresh.epoch};
        fail(Errc::epoch_mismatch, "conflicting install for the same directory version");
    }

    records_.insert_or_assign(d.username,
                              UserRecord{d.username, d.group_id, fresh, m.backup,
                                         static_cast<uint32_t>(d.new_committee.size()), auth_key,
                                         d.directory_version});
    dirty_ = true;
    return RefreshInstallAck{me->index, fresh.epoch};
}

Message Node::on_refresh_complete(const RefreshComplete& m) {
    auto it = records_.find(m.username);
    // Deletion is idempotent; a repeated completion is not an error.
    if (it == records_.end()) return RefreshCompleteAck{0};
    const UserRecord& rec = it->second;
    if (!m.verify(rec.user_pubkey))
        fail(Errc::bad_authorization, "completion not signed by the pinned user key");
    if (m.directory_version <= rec.directory_version)
        fail(Errc::bad_authorization, "completion does not advance the directory version");
    uint32_t old_index = rec.share.index;
    records_.erase(it);
    dirty_ = true;
    return RefreshCompleteAck{old_index};
}

Message Node::on_directory_put(const DirectoryPut& m) {
    put_entry(directory_, m.entry);
    dirty_ = true;
    return DirectoryPutAck{m.entry.version};
}

Message Node::on_directory_get(const DirectoryGet& m) const {
    const DirectoryEntry* e = find_entry(directory_, m.username);
    if (e == nullptr) return DirectoryGetResponse{false, DirectoryEntry{}};
    return DirectoryGetResponse{true, *e};
}

// ===== persistence =====
//
// Snapshot layout:
//   magic(8) || transport pk(32) || transport sk(32)
//   || u32 record count || records || directory store blob
// Record: str username || u8 group || u32 index || u64 epoch || u32 threshold
//   || blob share value || blob backup || u32 committee_n || raw32 user key
//   || u64 directory version
// Written to a temp file and renamed so a crashed write leaves the previous
// snapshot intact. Rate-limit buckets and the response cache are volatile.

void Node::persist() const {
    if (cfg_.storage_path.empty()) return;
    Bytes out(kSnapshotMagic.begin(), kSnapshotMagic.end());
    out.insert(out.end(), transport_.pk.begin(), transport_.pk.end());
    out.insert(out.end(), transport_.sk.begin(), transport_.sk.end());
    append_le32(out, static_cast<uint32_t>(records_.size()));
    for (const auto& [name, rec] : records_) {
        put_str(out, rec.username);
        out.push_back(rec.group_id);
        append_le32(out, rec.share.index);
        append_le64(out, rec.share.epoch);
        append_le32(out, rec.share.threshold);
        put_blob(out, rec.share.value.bytes());
        put_blob(out, rec.backup);
        append_le32(out, rec.committee_n);
        out.insert(out.end(), rec.user_pubkey.begin(), rec.user_pubkey.end());
        append_le64(out, rec.directory_version);
    }
    put_blob(out, encode_store(directory_));

    std::string tmp = cfg_.storage_path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(Errc::internal, "cannot open " + tmp + " for writing");
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) fail(Errc::internal, "short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), cfg_.storage_path.c_str()) != 0)
        fail(Errc::internal, "cannot rename " + tmp);
    wipe(out);
}

void Node::load_or_init(Rng& rng) {
    if (!cfg_.storage_path.empty() && std::filesystem::exists(cfg_.storage_path)) {
        std::ifstream f(cfg_.storage_path, std::ios::binary);
        if (!f) fail(Errc::corrupt_state, "cannot open " + cfg_.storage_path);
        Bytes raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        try {
            Reader r{ByteSpan(raw)};
            auto magic = r.raw<8>();
            if (!std::equal(magic.begin(), magic.end(), kSnapshotMagic.begin()))
                fail(Errc::corrupt_state, "bad snapshot magic");
            transport_.pk = r.raw<32>();
            transport_.sk = r.raw<32>();
            uint32_t n = r.u32();
            for (uint32_t i = 0; i < n; ++i) {
                UserRecord rec;
                rec.username = r.str();
                rec.group_id = r.u8();
                rec.share.index = r.u32();
                rec.share.epoch = r.u64();
                rec.share.threshold = r.u32();
                const Group& g = group_for(static_cast<GroupId>(rec.group_id));
                rec.share.value = g.decode_scalar(r.blob());
                rec.backup = r.blob();
                rec.committee_n = r.u32();
                rec.user_pubkey = r.raw<32>();
                rec.directory_version = r.u64();
                if (rec.username.empty() || rec.share.index == 0 ||
                    records_.count(rec.username) != 0)
                    fail(Errc::corrupt_state, "invalid record in snapshot");
                records_.emplace(rec.username, std::move(rec));
            }
            directory_ = decode_store(r.blob());
            r.finish();
        } catch (const Error& e) {
            if (e.code() == Errc::corrupt_state) throw;
            fail(Errc::corrupt_state, std::string("snapshot rejected: ") + e.what());
        }
        wipe(raw);
        return;
    }
    transport_ = BoxKeypair::generate(rng);
    if (!cfg_.storage_path.empty()) persist();
}

} // namespace kintsugi
