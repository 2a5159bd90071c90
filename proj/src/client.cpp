#include "kintsugi/client.hpp"

#include <algorithm>

#include "kintsugi/hash.hpp"

namespace kintsugi {

// ===== backup payload wrapper =====

Bytes pack_backup_payload(ByteSpan payload, const SigningKeypair& key) {
    Bytes out;
    append_le32(out, static_cast<uint32_t>(payload.size()));
    append(out, payload);
    out.insert(out.end(), key.sk.begin(), key.sk.end());
    return out;
}

UnpackedBackup unpack_backup_payload(ByteSpan plaintext) {
    if (plaintext.size() < 4) fail(Errc::malformed_message, "backup payload too short");
    uint32_t len = load_le32(plaintext);
    if (plaintext.size() != 4 + static_cast<size_t>(len) + 64)
        fail(Errc::malformed_message, "backup payload length mismatch");
    UnpackedBackup out;
    out.payload.assign(plaintext.begin() + 4, plaintext.begin() + 4 + len);
    std::copy(plaintext.begin() + 4 + len, plaintext.end(), out.key.sk.begin());
    // ed25519 secret keys carry the public half in their upper 32 bytes
    std::copy(out.key.sk.begin() + 32, out.key.sk.end(), out.key.pk.begin());
    return out;
}

// ===== session base =====

std::vector<Outgoing> Session::start() {
    if (status_ != Status::idle) fail(Errc::internal, "session already started");
    status_ = Status::running;
    try {
        return begin();
    } catch (const Error& e) {
        fail_with(e.code(), e.what());
        return {};
    }
}

std::vector<Outgoing> Session::on_message(const std::string& from_id, ByteSpan envelope) {
    if (status_ != Status::running) return {};
    Envelope env;
    try {
        env = decode_envelope(envelope);
    } catch (const Error&) {
        return {}; // unparseable responses are dropped, not fatal
    }
    auto it = inflight_.find(env.session);
    if (it == inflight_.end() || it->second.node_id != from_id) return {}; // dup or stray
    InFlight fl = it->second;
    inflight_.erase(it);
    trace_.push_back("<- " + from_id + " " + std::string(msg_type_name(env.type)));
    if (!fl.tracked) return {};
    try {
        return step(from_id, fl.req, env);
    } catch (const Error& e) {
        fail_with(e.code(), e.what());
        return {};
    }
}

Outgoing Session::send(const NodeAddress& to, const Message& m, bool tracked) {
    SessionId sid = random_session_id(rng_);
    inflight_.emplace(sid, InFlight{to.node_id, message_type(m), tracked});
    trace_.push_back("-> " + to.node_id + " " + std::string(msg_type_name(message_type(m))));
    return Outgoing{to.node_id, to.address, make_envelope(m, sid)};
}

void Session::succeed() {
    status_ = Status::succeeded;
    scrub();
}

void Session::fail_with(Errc code, const std::string& detail) {
    status_ = Status::failed;
    failure_code_ = code;
    failure_detail_ = detail;
    scrub();
}

void Session::fail_from_node(const std::string& from_id, const ErrorResponse& err, Errc outer) {
    Errc inner = err.errc();
    bool keep = inner == Errc::bad_authorization || inner == Errc::decryption_failed ||
                inner == Errc::not_found;
    fail_with(keep ? inner : outer, "node " + from_id + " rejected: " + err.message);
}

void Session::cancel() {
    if (status_ != Status::running) return;
    fail_with(cancel_code(), "cancelled while waiting on " + waiting_on());
}

namespace {

void check_addresses(const std::vector<NodeAddress>& nodes, const char* what) {
    if (nodes.empty()) fail(Errc::scenario_error, std::string(what) + " list is empty");
    std::set<std::string> ids;
    for (const NodeAddress& n : nodes)
        if (n.node_id.empty() || !ids.insert(n.node_id).second)
            fail(Errc::scenario_error, std::string(what) + " node ids must be distinct and nonempty");
}

[[noreturn]] void unexpected_reply(MsgType req, MsgType got) {
    fail(Errc::malformed_message, std::string(msg_type_name(req)) + " answered with " +
                                      std::string(msg_type_name(got)));
}

} // namespace

// ===== registration =====

RegisterSession::RegisterSession(RegistrationPlan plan, Rng& rng)
    : Session(rng), plan_(std::move(plan)) {}

std::vector<Outgoing> RegisterSession::begin() {
    if (plan_.username.empty()) fail(Errc::scenario_error, "registration needs a username");
    if (plan_.password.empty()) fail(Errc::scenario_error, "registration needs a password");
    check_addresses(plan_.committee, "committee");
    if (plan_.committee.size() < static_cast<size_t>(plan_.threshold) + 1)
        fail(Errc::insufficient_indices, "committee must hold at least t+1 nodes");

    const Group& g = group_for(plan_.group);
    key_ = SigningKeypair::generate(rng_);
    secret_ = g.scalar_random(rng_);

    // The only moment anyone knows s: derive the backup key directly.
    Element p = g.hash_to_group(plan_.password, kDomainPassword);
    BackupKey bkey = derive_backup_key(g, g.mul(secret_, p));
    Bytes plaintext = pack_backup_payload(plan_.payload, key_);
    backup_ = seal_backup(bkey, plaintext, to_bytes(plan_.username), rng_).encode();
    wipe(plaintext);
    wipe(std::span<uint8_t>(bkey));

    std::vector<uint32_t> indices(plan_.committee.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<uint32_t>(i + 1);
    shares_ = deal_shares(g, secret_, plan_.threshold, indices, rng_);

    entry_ = DirectoryEntry{};
    entry_.username = plan_.username;
    entry_.user_pubkey = key_.pk;
    entry_.version = plan_.directory_version;
    for (size_t i = 0; i < plan_.committee.size(); ++i)
        entry_.committee.push_back(
            CommitteeMember{plan_.committee[i].node_id, plan_.committee[i].address, indices[i]});
    entry_.threshold = plan_.threshold;
    entry_.sign(key_.sk);

    std::vector<Outgoing> out;
    for (size_t i = 0; i < plan_.committee.size(); ++i) {
        RegisterRequest m;
        m.username = plan_.username;
        m.user_pubkey = key_.pk;
        m.group_id = static_cast<uint8_t>(plan_.group);
        m.committee_n = static_cast<uint32_t>(plan_.committee.size());
        m.threshold = plan_.threshold;
        m.index = shares_[i].index;
        m.epoch = shares_[i].epoch;
        m.directory_version = plan_.directory_version;
        m.share_value = g.encode_scalar(shares_[i].value);
        m.backup = backup_;
        out.push_back(send(plan_.committee[i], m));
    }
    acks_needed_ = plan_.committee.size();

    // Dealer duty done: nothing after this point needs s, the shares, or the
    // password, so they go now rather than at session teardown.
    scrub();
    return out;
}

void RegisterSession::scrub() {
    wipe(std::span<uint8_t>(secret_.data));
    for (Share& s : shares_) wipe(std::span<uint8_t>(s.value.data));
    shares_.clear();
    wipe(plan_.password);
    plan_.password.clear();
}

bool RegisterSession::sensitive_cleared() const {
    bool zero = std::all_of(secret_.data.begin(), secret_.data.end(),
                            [](uint8_t b) { return b == 0; });
    return zero && shares_.empty() && plan_.password.empty();
}

std::vector<Outgoing> RegisterSession::step(const std::string& from_id, MsgType req,
                                            const Envelope& env) {
    if (const auto* err = std::get_if<ErrorResponse>(&env.body)) {
        fail_from_node(from_id, *err,
                       req == MsgType::directory_put ? Errc::directory_rejected
                                                     : Errc::node_rejected);
        return {};
    }
    if (req == MsgType::register_request) {
        if (!std::holds_alternative<RegisterAck>(env.body)) unexpected_reply(req, env.type);
        if (--acks_needed_ > 0) return {};
        // every node stored its share: the committee exists, announce it
        publishing_ = true;
        std::vector<Outgoing> out;
        for (const NodeAddress& n : plan_.committee) out.push_back(send(n, DirectoryPut{entry_}));
        puts_needed_ = plan_.committee.size();
        return out;
    }
    if (req == MsgType::directory_put) {
        const auto* ack = std::get_if<DirectoryPutAck>(&env.body);
        if (ack == nullptr) unexpected_reply(req, env.type);
        if (ack->version != entry_.version)
            fail(Errc::directory_rejected, "directory stored an unexpected version");
        if (--puts_needed_ == 0) succeed();
        return {};
    }
    unexpected_reply(req, env.type);
}

std::string RegisterSession::waiting_on() const {
    if (publishing_) return std::to_string(puts_needed_) + " directory acks";
    return std::to_string(acks_needed_) + " registration acks";
}

// ===== recovery =====

RecoverSession::RecoverSession(std::string username, Bytes password, const Group& g,
                               std::vector<NodeAddress> bootstrap, Rng& rng,
                               std::set<std::string> exclude)
    : Session(rng),
      username_(std::move(username)),
      password_(std::move(password)),
      g_(g),
      bootstrap_(std::move(bootstrap)),
      exclude_(std::move(exclude)) {}

std::vector<Outgoing> RecoverSession::begin() {
    if (username_.empty()) fail(Errc::scenario_error, "recovery needs a username");
    if (password_.empty()) fail(Errc::scenario_error, "recovery needs a password");
    check_addresses(bootstrap_, "bootstrap");
    std::vector<Outgoing> out;
    for (const NodeAddress& n : bootstrap_) out.push_back(send(n, DirectoryGet{username_}));
    lookups_pending_ = bootstrap_.size();
    return out;
}

std::vector<Outgoing> RecoverSession::on_entry(const DirectoryEntry& entry) {
    entry_ = entry;
    have_entry_ = true;

    std::vector<NodeAddress> targets;
    std::vector<uint32_t> indices;
    for (const CommitteeMember& mem : entry_.committee) {
        if (exclude_.count(mem.node_id)) continue;
        targets.push_back(NodeAddress{mem.node_id, mem.address});
        indices.push_back(mem.index);
    }
    if (indices.size() < static_cast<size_t>(entry_.threshold) + 1)
        fail(Errc::insufficient_responses, "exclusions leave fewer than t+1 reachable nodes");

    auto [state, blinded] = blind(g_, password_, indices, rng_);
    blinding_ = std::move(state);
    // From here on the blinded point stands in for the password.
    wipe(password_);
    password_.clear();

    std::vector<Outgoing> out;
    for (size_t i = 0; i < targets.size(); ++i)
        out.push_back(
            send(targets[i], RecoveryRequest{username_, g_.encode_element(blinded[i].element)}));
    return out;
}

size_t RecoverSession::recovery_inflight() const {
    size_t n = 0;
    for (const auto& [sid, fl] : inflight_)
        if (fl.req == MsgType::recovery_request) ++n;
    return n;
}

std::vector<Outgoing> RecoverSession::step(const std::string& from_id, MsgType req,
                                           const Envelope& env) {
    if (req == MsgType::directory_get) {
        if (have_entry_) return {}; // a slower bootstrap replica; already settled
        bool present = false;
        if (const auto* got = std::get_if<DirectoryGetResponse>(&env.body)) {
            present =
                got->present && got->entry.username == username_ && entry_well_formed(got->entry);
        } else if (!std::holds_alternative<ErrorResponse>(env.body)) {
            unexpected_reply(req, env.type);
        }
        --lookups_pending_;
        if (present) return on_entry(std::get<DirectoryGetResponse>(env.body).entry);
        if (lookups_pending_ == 0)
            fail(Errc::not_found, "no bootstrap node has a directory entry for " + username_);
        return {};
    }

    if (req != MsgType::recovery_request) unexpected_reply(req, env.type);
    if (const auto* resp = std::get_if<RecoveryResponse>(&env.body)) {
        do {
            if (!epoch_set_) {
                // the first answer fixes what this session considers current
                epoch_set_ = true;
                awaited_epoch_ = resp->epoch;
                awaited_threshold_ = resp->threshold;
            } else if (resp->epoch != awaited_epoch_ || resp->threshold != awaited_threshold_) {
                break; // racing rotation; a retry will see the new epoch
            }
            if (evaluated_.size() >= static_cast<size_t>(awaited_threshold_) + 1) break;
            if (!blinding_.blinding.count(resp->index) || seen_indices_.count(resp->index)) break;
            EvaluatedElement ev{resp->index, resp->epoch, Element{}};
            try {
                ev.element = g_.decode_element(resp->evaluated);
                EncryptedBackup::decode(resp->backup);
            } catch (const Error&) {
                break; // mangled response; treated as if the node stayed silent
            }
            seen_indices_.insert(resp->index);
            evaluated_.push_back(ev);
            backups_.push_back(resp->backup);
        } while (false);
    } else if (!std::holds_alternative<ErrorResponse>(env.body)) {
        unexpected_reply(req, env.type);
    }
    // error responses (rate limit, unknown user) are final for that node;
    // either way, see whether a quorum is still possible
    try_finish();
    return {};
}

void RecoverSession::try_finish() {
    if (status() != Status::running) return;
    if (evaluated_.size() < static_cast<size_t>(awaited_threshold_) + 1 || !epoch_set_) {
        if (recovery_inflight() == 0)
            fail_with(Errc::insufficient_responses,
                      "every node answered but fewer than t+1 responses were usable");
        return;
    }

    Element point = unblind_and_combine(g_, blinding_, evaluated_, awaited_threshold_);
    BackupKey key = derive_backup_key(g_, point);
    bool opened = false;
    for (const Bytes& raw : backups_) {
        try {
            Bytes plaintext = open_backup(key, EncryptedBackup::decode(raw), to_bytes(username_));
            result_ = unpack_backup_payload(plaintext);
            wipe(plaintext);
            opened = true;
            break;
        } catch (const Error&) {
            continue; // backup did not authenticate under the derived key
        }
    }
    wipe(std::span<uint8_t>(key));
    if (opened)
        succeed();
    else
        fail_with(Errc::decryption_failed,
                  "no backup authenticated: wrong password or tampered responses");
}

void RecoverSession::scrub() {
    wipe(password_);
    password_.clear();
    for (auto& [idx, r] : blinding_.blinding) wipe(std::span<uint8_t>(r.data));
    blinding_.blinding.clear();
}

bool RecoverSession::sensitive_cleared() const {
    return password_.empty() && blinding_.blinding.empty();
}

Errc RecoverSession::cancel_code() const {
    // hanging short of a quorum is the async-model way to observe "fewer
    // than t+1 nodes ever responded"
    if (have_entry_ && evaluated_.size() < static_cast<size_t>(awaited_threshold_) + 1)
        return Errc::insufficient_responses;
    return Errc::cancelled;
}

std::string RecoverSession::waiting_on() const {
    if (!have_entry_) return "directory lookups";
    return "recovery responses (" + std::to_string(evaluated_.size()) + " of " +
           std::to_string(awaited_threshold_ + 1) + " usable)";
}

// ===== rotation =====

RotateSession::RotateSession(RotationPlan plan, Rng& rng) : Session(rng), plan_(std::move(plan)) {}

std::vector<Outgoing> RotateSession::begin() {
    if (plan_.username.empty()) fail(Errc::scenario_error, "rotation needs a username");
    check_addresses(plan_.bootstrap, "bootstrap");
    check_addresses(plan_.new_committee, "new committee");
    if (plan_.new_committee.size() < static_cast<size_t>(plan_.new_threshold) + 1)
        fail(Errc::insufficient_indices, "new committee must hold at least t_new+1 nodes");
    std::vector<Outgoing> out;
    for (const NodeAddress& n : plan_.bootstrap) out.push_back(send(n, DirectoryGet{plan_.username}));
    lookups_pending_ = plan_.bootstrap.size();
    return out;
}

std::vector<Outgoing> RotateSession::on_entry(const DirectoryEntry& entry) {
    if (entry.user_pubkey != plan_.user_key.pk)
        fail(Errc::bad_authorization, "directory pins a different user key");
    entry_ = entry;
    have_entry_ = true;
    for (const CommitteeMember& mem : entry_.committee)
        old_by_index_[mem.index] = NodeAddress{mem.node_id, mem.address};

    // contributor set: caller's choice or the first t_old+1 listed
    std::vector<uint32_t> contributors = plan_.contributors;
    if (contributors.empty())
        for (size_t i = 0; i < static_cast<size_t>(entry_.threshold) + 1; ++i)
            contributors.push_back(entry_.committee[i].index);
    if (contributors.size() != static_cast<size_t>(entry_.threshold) + 1)
        fail(Errc::insufficient_contributors, "need exactly t_old+1 contributors");
    std::set<uint32_t> seen;
    for (uint32_t c : contributors)
        if (!old_by_index_.count(c) || !seen.insert(c).second)
            fail(Errc::insufficient_contributors,
                 "contributors must be distinct members of the old committee");

    directive_ = RotationDirective{};
    directive_.username = plan_.username;
    directive_.group_id = static_cast<uint8_t>(plan_.group);
    directive_.old_committee = entry_.committee;
    directive_.contributors = contributors;
    directive_.new_threshold = plan_.new_threshold;
    directive_.directory_version = entry_.version + 1;

    phase_ = Phase::node_info;
    std::vector<Outgoing> out;
    for (const NodeAddress& n : plan_.new_committee) out.push_back(send(n, NodeInfoRequest{}));
    return out;
}

std::vector<Outgoing> RotateSession::maybe_send_directives() {
    if (transport_keys_.size() < plan_.new_committee.size()) return {};
    for (size_t i = 0; i < plan_.new_committee.size(); ++i) {
        const NodeAddress& n = plan_.new_committee[i];
        directive_.new_committee.push_back(RotationMember{
            n.node_id, n.address, static_cast<uint32_t>(i + 1), transport_keys_.at(n.node_id)});
    }
    directive_.sign(plan_.user_key.sk);

    phase_ = Phase::envelopes;
    std::vector<Outgoing> out;
    for (uint32_t c : directive_.contributors) {
        envelopes_pending_.insert(c);
        out.push_back(send(old_by_index_.at(c), RefreshDirective{directive_}));
    }
    return out;
}

std::vector<Outgoing> RotateSession::send_installs() {
    phase_ = Phase::installs;
    std::vector<Outgoing> out;
    for (const RotationMember& mem : directive_.new_committee) {
        RefreshInstall inst;
        inst.directive = directive_;
        inst.user_pubkey = plan_.user_key.pk;
        for (const auto& [from, sealed] : collected_[mem.index])
            inst.envelopes.push_back(SealedSubshare{from, sealed});
        inst.backup = backup_;
        out.push_back(send(NodeAddress{mem.node_id, mem.address}, inst));
    }
    installs_pending_ = directive_.new_committee.size();
    return out;
}

std::vector<Outgoing> RotateSession::publish() {
    phase_ = Phase::publishing;
    DirectoryEntry next;
    next.username = plan_.username;
    next.user_pubkey = plan_.user_key.pk;
    next.version = directive_.directory_version;
    for (const RotationMember& mem : directive_.new_committee)
        next.committee.push_back(CommitteeMember{mem.node_id, mem.address, mem.index});
    next.threshold = plan_.new_threshold;
    next.sign(plan_.user_key.sk);

    std::set<std::string> new_ids;
    for (const NodeAddress& n : plan_.new_committee) new_ids.insert(n.node_id);

    std::vector<Outgoing> out;
    for (const NodeAddress& n : plan_.new_committee) out.push_back(send(n, DirectoryPut{next}));
    puts_pending_ = plan_.new_committee.size();
    // departing replicas get the news too, but rotation must not hang on
    // nodes the precondition does not require to be alive
    for (const CommitteeMember& mem : entry_.committee)
        if (!new_ids.count(mem.node_id))
            out.push_back(send(NodeAddress{mem.node_id, mem.address}, DirectoryPut{next}, false));
    return out;
}

std::vector<Outgoing> RotateSession::send_completes() {
    phase_ = Phase::completing;
    RefreshComplete done;
    done.username = plan_.username;
    done.directory_version = directive_.directory_version;
    done.sign(plan_.user_key.sk);

    std::set<std::string> new_ids;
    for (const NodeAddress& n : plan_.new_committee) new_ids.insert(n.node_id);
    std::set<std::string> contributor_ids;
    for (uint32_t c : directive_.contributors) contributor_ids.insert(old_by_index_.at(c).node_id);

    std::vector<Outgoing> out;
    for (const CommitteeMember& mem : entry_.committee) {
        if (new_ids.count(mem.node_id)) continue; // staying members keep the new share
        // contributors are alive by precondition, so their deletion acks are
        // awaited; other departures are told on a best-effort basis
        bool tracked = contributor_ids.count(mem.node_id) > 0;
        out.push_back(send(NodeAddress{mem.node_id, mem.address}, done, tracked));
        if (tracked) ++completes_pending_;
    }
    if (completes_pending_ == 0) succeed();
    return out;
}

std::vector<Outgoing> RotateSession::step(const std::string& from_id, MsgType req,
                                          const Envelope& env) {
    if (req == MsgType::directory_get) {
        if (have_entry_) return {}; // a slower bootstrap replica; already settled
        bool present = false;
        if (const auto* got = std::get_if<DirectoryGetResponse>(&env.body)) {
            present = got->present && got->entry.username == plan_.username &&
                      entry_well_formed(got->entry);
        } else if (!std::holds_alternative<ErrorResponse>(env.body)) {
            unexpected_reply(req, env.type);
        }
        --lookups_pending_;
        if (present) return on_entry(std::get<DirectoryGetResponse>(env.body).entry);
        if (lookups_pending_ == 0)
            fail(Errc::not_found, "no bootstrap node has a directory entry for " + plan_.username);
        return {};
    }

    if (const auto* err = std::get_if<ErrorResponse>(&env.body)) {
        fail_from_node(from_id, *err,
                       req == MsgType::directory_put ? Errc::directory_rejected
                                                     : Errc::node_rejected);
        return {};
    }

    switch (req) {
    case MsgType::node_info_request: {
        const auto* info = std::get_if<NodeInfoResponse>(&env.body);
        if (info == nullptr) unexpected_reply(req, env.type);
        if (info->node_id != from_id)
            fail(Errc::malformed_message, "node info reply names a different node");
        transport_keys_[info->node_id] = info->transport_pk;
        return maybe_send_directives();
    }
    case MsgType::refresh_directive: {
        const auto* envs = std::get_if<RefreshEnvelopes>(&env.body);
        if (envs == nullptr) unexpected_reply(req, env.type);
        if (envelopes_pending_.erase(envs->from_index) == 0)
            fail(Errc::malformed_message, "envelopes from an unexpected contributor");
        if (backup_.empty()) backup_ = envs->backup;
        for (const SealedSubshare& e : envs->envelopes)
            collected_[e.peer_index][envs->from_index] = e.sealed;
        if (envelopes_pending_.empty()) return send_installs();
        return {};
    }
    case MsgType::refresh_install: {
        const auto* ack = std::get_if<RefreshInstallAck>(&env.body);
        if (ack == nullptr) unexpected_reply(req, env.type);
        if (new_epoch_ == 0) new_epoch_ = ack->epoch;
        if (ack->epoch != new_epoch_)
            fail(Errc::epoch_mismatch, "new committee acks disagree on the epoch");
        if (--installs_pending_ == 0) return publish();
        return {};
    }
    case MsgType::directory_put: {
        const auto* ack = std::get_if<DirectoryPutAck>(&env.body);
        if (ack == nullptr) unexpected_reply(req, env.type);
        if (ack->version != directive_.directory_version)
            fail(Errc::directory_rejected, "directory stored an unexpected version");
        if (--puts_pending_ == 0) return send_completes();
        return {};
    }
    case MsgType::refresh_complete: {
        if (!std::holds_alternative<RefreshCompleteAck>(env.body)) unexpected_reply(req, env.type);
        if (--completes_pending_ == 0) succeed();
        return {};
    }
    default: unexpected_reply(req, env.type);
    }
}

std::string RotateSession::waiting_on() const {
    switch (phase_) {
    case Phase::lookup: return "directory lookups";
    case Phase::node_info: return "node info replies";
    case Phase::envelopes: return "refresh envelopes from contributors";
    case Phase::installs: return "install acks";
    case Phase::publishing: return "directory acks";
    case Phase::completing: return "deletion acks";
    }
    return "nothing";
}

} // namespace kintsugi
