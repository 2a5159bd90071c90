#include <doctest.h>

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <numeric>

#include "kintsugi/client.hpp"
#include "kintsugi/hash.hpp"
#include "kintsugi/node.hpp"

using namespace kintsugi;

namespace {

// In-memory committee: every Outgoing is handled synchronously and the reply
// queued, so message order is the send order unless a test reorders by hand.
struct Fleet {
    DeterministicRng rng;
    SimClock clock;
    std::vector<std::unique_ptr<Node>> nodes;
    std::map<std::string, Node*> by_id;

    Fleet(std::initializer_list<std::string> ids, uint64_t seed, const std::string& label,
          uint32_t rate_capacity = 1000)
        : rng(seed, label) {
        for (const std::string& id : ids) {
            NodeConfig cfg{.node_id = id};
            cfg.rate_capacity = rate_capacity;
            nodes.push_back(std::make_unique<Node>(cfg, clock, rng));
            by_id[id] = nodes.back().get();
        }
    }

    Node& node(const std::string& id) { return *by_id.at(id); }
    NodeAddress addr(const std::string& id) const { return {id, "mem:" + id}; }
    std::vector<NodeAddress> addrs(std::initializer_list<std::string> ids) const {
        std::vector<NodeAddress> out;
        for (const std::string& id : ids) out.push_back(addr(id));
        return out;
    }

    // Pumps until traffic drains. Keeps delivering after the session settles
    // so stray late replies exercise the ignore paths.
    void drive(Session& s, const std::string& source = "client") {
        std::deque<std::pair<std::string, Bytes>> pending;
        auto push = [&](std::vector<Outgoing> out) {
            for (Outgoing& o : out)
                pending.emplace_back(o.dest_id, by_id.at(o.dest_id)->handle(source, o.envelope));
        };
        push(s.start());
        while (!pending.empty()) {
            auto [id, reply] = std::move(pending.front());
            pending.pop_front();
            push(s.on_message(id, reply));
        }
    }
};

SigningKeypair register_user(Fleet& f, GroupId gid, const std::string& name, const Bytes& pwd,
                             const Bytes& payload, const std::vector<NodeAddress>& committee,
                             uint32_t threshold) {
    RegistrationPlan plan;
    plan.username = name;
    plan.password = pwd;
    plan.payload = payload;
    plan.group = gid;
    plan.committee = committee;
    plan.threshold = threshold;
    RegisterSession s(plan, f.rng);
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);
    CHECK(s.sensitive_cleared());
    return s.user_key();
}

RecoveredSecret recover_user(Fleet& f, const Group& g, const std::string& name, const Bytes& pwd,
                             const std::vector<NodeAddress>& bootstrap,
                             std::set<std::string> exclude = {}) {
    RecoverSession s(name, pwd, g, bootstrap, f.rng, std::move(exclude));
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);
    CHECK(s.sensitive_cleared());
    return s.result();
}

Errc recover_expect_failure(Fleet& f, const Group& g, const std::string& name, const Bytes& pwd,
                            const std::vector<NodeAddress>& bootstrap,
                            std::set<std::string> exclude = {}) {
    RecoverSession s(name, pwd, g, bootstrap, f.rng, std::move(exclude));
    f.drive(s);
    REQUIRE(s.status() == Session::Status::failed);
    CHECK(s.sensitive_cleared());
    return s.failure_code();
}

Envelope node_call(Node& node, const Message& m, Rng& rng, const std::string& source = "c") {
    SessionId sid = random_session_id(rng);
    Envelope env = decode_envelope(node.handle(source, make_envelope(m, sid)));
    REQUIRE(env.session == sid);
    return env;
}

template <class T>
T node_expect(Node& node, const Message& m, Rng& rng, const std::string& source = "c") {
    Envelope env = node_call(node, m, rng, source);
    if (const auto* err = std::get_if<ErrorResponse>(&env.body))
        FAIL("unexpected error: " << err->message);
    REQUIRE(std::holds_alternative<T>(env.body));
    return std::get<T>(env.body);
}

} // namespace

TEST_CASE("register then recover end to end") {
    Fleet f({"n1", "n2", "n3", "n4", "n5"}, 0xe1, "client-e2e");
    Bytes pwd = to_bytes("correct horse battery staple");
    Bytes payload = to_bytes("master key for the vault");

    auto committee = f.addrs({"n1", "n2", "n3", "n4", "n5"});
    SigningKeypair key = register_user(f, GroupId::ristretto, "alice", pwd, payload, committee, 3);

    // every node holds a distinct share at epoch 0 and the same sealed backup
    std::set<uint32_t> indices;
    Bytes backup;
    for (auto& [id, node] : f.by_id) {
        const UserRecord* rec = node->record("alice");
        REQUIRE(rec != nullptr);
        CHECK(rec->share.epoch == 0);
        CHECK(rec->share.threshold == 3);
        CHECK(rec->committee_n == 5);
        CHECK(rec->user_pubkey == key.pk);
        CHECK(rec->directory_version == 1);
        indices.insert(rec->share.index);
        if (backup.empty()) backup = rec->backup;
        CHECK(rec->backup == backup);
    }
    CHECK(indices == std::set<uint32_t>{1, 2, 3, 4, 5});

    // any single replica bootstraps the lookup
    auto got = recover_user(f, ristretto_group(), "alice", pwd, {f.addr("n4")});
    CHECK(got.payload == payload);
    CHECK(got.key.pk == key.pk);
    CHECK(got.key.sk == key.sk);
}

TEST_CASE("recovery combines hand-placed toy shares") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xe2, "client-toy");
    SigningKeypair key = SigningKeypair::generate(f.rng);
    Bytes pwd = to_bytes("hunter2");
    Bytes payload = to_bytes("the vault combination");

    // secret 19 shared by 19 + 3x over Z_101: shares (1,22), (2,25), (3,28)
    BackupKey bkey = derive_backup_key(g, g.mul(g.scalar_from_u64(19), g.hash_to_group(pwd, kDomainPassword)));
    Bytes backup = seal_backup(bkey, pack_backup_payload(payload, key), to_bytes("alice"), f.rng).encode();

    const uint64_t values[] = {22, 25, 28};
    for (uint32_t i = 0; i < 3; ++i) {
        RegisterRequest m;
        m.username = "alice";
        m.user_pubkey = key.pk;
        m.group_id = static_cast<uint8_t>(g.id());
        m.committee_n = 3;
        m.threshold = 1;
        m.index = i + 1;
        m.directory_version = 1;
        m.share_value = g.encode_scalar(g.scalar_from_u64(values[i]));
        m.backup = backup;
        node_expect<RegisterAck>(f.node("n" + std::to_string(i + 1)), m, f.rng);
    }
    DirectoryEntry entry;
    entry.username = "alice";
    entry.user_pubkey = key.pk;
    entry.version = 1;
    entry.committee = {{"n1", "mem:n1", 1}, {"n2", "mem:n2", 2}, {"n3", "mem:n3", 3}};
    entry.threshold = 1;
    entry.sign(key.sk);
    for (uint32_t i = 0; i < 3; ++i)
        node_expect<DirectoryPutAck>(f.node("n" + std::to_string(i + 1)), DirectoryPut{entry}, f.rng);

    auto got = recover_user(f, g, "alice", pwd, {f.addr("n1")});
    CHECK(got.payload == payload);
    CHECK(got.key.pk == key.pk);

    // any two of the three shares suffice at threshold 1
    for (const std::string& skip : {"n1", "n2", "n3"}) {
        auto partial = recover_user(f, g, "alice", pwd, {f.addr("n2")}, {skip});
        CHECK(partial.payload == payload);
    }
}

TEST_CASE("wrong password fails closed and a retry succeeds") {
    const Group& g = ristretto_group();
    Fleet f({"n1", "n2"}, 0xe3, "client-wrongpw");
    Bytes pwd = to_bytes("right password");
    Bytes payload = to_bytes("secret note");
    register_user(f, GroupId::ristretto, "bob", pwd, payload, f.addrs({"n1", "n2"}), 1);

    Errc code = recover_expect_failure(f, g, "bob", to_bytes("wrong password"), {f.addr("n1")});
    CHECK(code == Errc::decryption_failed);

    // nothing latched: the same fleet serves the honest retry
    auto got = recover_user(f, g, "bob", pwd, {f.addr("n2")});
    CHECK(got.payload == payload);
}

TEST_CASE("recovered payload is independent of response order") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3", "n4"}, 0xe4, "client-order");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("order independent");
    register_user(f, GroupId::toy, "carol", pwd, payload, f.addrs({"n1", "n2", "n3", "n4"}), 1);

    std::vector<size_t> order(4);
    std::iota(order.begin(), order.end(), 0);
    do {
        RecoverSession s("carol", pwd, g, {f.addr("n2")}, f.rng);
        auto out = s.start();
        REQUIRE(out.size() == 1);
        out = s.on_message("n2", f.node("n2").handle("client", out[0].envelope));
        REQUIRE(out.size() == 4); // one recovery request per committee member

        std::vector<std::pair<std::string, Bytes>> replies;
        for (Outgoing& o : out)
            replies.emplace_back(o.dest_id, f.by_id.at(o.dest_id)->handle("client", o.envelope));
        for (size_t i : order) s.on_message(replies[i].first, replies[i].second);

        REQUIRE(s.status() == Session::Status::succeeded);
        CHECK(s.result().payload == payload);
        CHECK(s.epoch() == 0);

        // a duplicate of an already-consumed reply is ignored
        CHECK(s.on_message(replies[order[0]].first, replies[order[0]].second).empty());
        CHECK(s.status() == Session::Status::succeeded);
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("tampered evaluation poisons the quorum until the node is excluded") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xe5, "client-tamper");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("tamper target");
    register_user(f, GroupId::toy, "dave", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);

    // doubles the evaluated element: still a valid group element, wrong value
    auto tamper = [&](const Bytes& reply) {
        Envelope env = decode_envelope(reply);
        auto resp = std::get<RecoveryResponse>(env.body);
        resp.evaluated = g.encode_element(g.mul(g.scalar_from_u64(2), g.decode_element(resp.evaluated)));
        return make_envelope(resp, env.session);
    };

    RecoverSession s("dave", pwd, g, {f.addr("n1")}, f.rng);
    auto out = s.start();
    out = s.on_message("n1", f.node("n1").handle("client", out[0].envelope));
    REQUIRE(out.size() == 3);
    // n1's reply is poisoned; with threshold 1 the first two answers form the
    // quorum, so the combine comes out wrong and no backup authenticates
    for (Outgoing& o : out) {
        Bytes reply = f.by_id.at(o.dest_id)->handle("client", o.envelope);
        if (o.dest_id == "n1") reply = tamper(reply);
        s.on_message(o.dest_id, reply);
    }
    REQUIRE(s.status() == Session::Status::failed);
    CHECK(s.failure_code() == Errc::decryption_failed);

    // retry around the poisoned node
    auto got = recover_user(f, g, "dave", pwd, {f.addr("n2")}, {"n1"});
    CHECK(got.payload == payload);
}

TEST_CASE("responses from a different epoch or threshold are discarded") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xe6, "client-epoch");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("epoch fencing");
    register_user(f, GroupId::toy, "erin", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);

    auto mangle = [&](const Bytes& reply, auto&& edit) {
        Envelope env = decode_envelope(reply);
        auto resp = std::get<RecoveryResponse>(env.body);
        edit(resp);
        return make_envelope(resp, env.session);
    };

    uint64_t fake_epoch = 7;
    uint32_t fake_threshold = 9;
    SUBCASE("epoch skew") { fake_threshold = 0; }
    SUBCASE("threshold skew") { fake_epoch = 0; }

    RecoverSession s("erin", pwd, g, {f.addr("n1")}, f.rng);
    auto out = s.start();
    out = s.on_message("n1", f.node("n1").handle("client", out[0].envelope));
    REQUIRE(out.size() == 3);
    // the first answer fixes epoch 0 / threshold 1; the second claims
    // something else and must not count toward the quorum
    std::vector<Bytes> replies;
    for (Outgoing& o : out) replies.push_back(f.by_id.at(o.dest_id)->handle("client", o.envelope));
    s.on_message(out[0].dest_id, replies[0]);
    s.on_message(out[1].dest_id, mangle(replies[1], [&](RecoveryResponse& r) {
                     if (fake_epoch) r.epoch = fake_epoch;
                     if (fake_threshold) r.threshold = fake_threshold;
                 }));
    CHECK(s.status() == Session::Status::running); // still one short
    s.on_message(out[2].dest_id, replies[2]);
    REQUIRE(s.status() == Session::Status::succeeded);
    CHECK(s.result().payload == payload);
}

TEST_CASE("recovery reports NotFound only when every bootstrap replica misses") {
    const Group& g = ristretto_group();
    Fleet f({"n1", "n2"}, 0xe7, "client-notfound");
    register_user(f, GroupId::ristretto, "frank", to_bytes("pw"), to_bytes("x"),
                  f.addrs({"n1", "n2"}), 1);

    Errc code = recover_expect_failure(f, g, "nobody", to_bytes("pw"), f.addrs({"n1", "n2"}));
    CHECK(code == Errc::not_found);
}

TEST_CASE("quorum shortfall surfaces as InsufficientResponses") {
    const Group& g = toy_group();
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("shortfall");

    SUBCASE("every node rate-limits the request") {
        Fleet f({"n1", "n2", "n3"}, 0xe8, "client-limited", 0);
        register_user(f, GroupId::toy, "gina", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);
        Errc code = recover_expect_failure(f, g, "gina", pwd, {f.addr("n1")});
        CHECK(code == Errc::insufficient_responses);
    }

    SUBCASE("errors plus one honest answer still miss t+1") {
        Fleet f({"n1", "n2", "n3"}, 0xe9, "client-errors");
        register_user(f, GroupId::toy, "gina", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);

        RecoverSession s("gina", pwd, g, {f.addr("n1")}, f.rng);
        auto out = s.start();
        out = s.on_message("n1", f.node("n1").handle("client", out[0].envelope));
        REQUIRE(out.size() == 3);
        s.on_message(out[0].dest_id, f.node(out[0].dest_id).handle("client", out[0].envelope));
        for (size_t i : {1u, 2u}) {
            SessionId sid = decode_envelope(out[i].envelope).session;
            ErrorResponse err{static_cast<uint16_t>(Errc::unknown_user), "UnknownUser"};
            s.on_message(out[i].dest_id, make_envelope(err, sid));
        }
        REQUIRE(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::insufficient_responses);
        CHECK(s.sensitive_cleared());
    }

    SUBCASE("cancelling while short of the quorum") {
        Fleet f({"n1", "n2", "n3"}, 0xea, "client-cancel");
        register_user(f, GroupId::toy, "gina", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);

        RecoverSession s("gina", pwd, g, {f.addr("n1")}, f.rng);
        auto out = s.start();
        out = s.on_message("n1", f.node("n1").handle("client", out[0].envelope));
        s.on_message(out[0].dest_id, f.node(out[0].dest_id).handle("client", out[0].envelope));
        REQUIRE(s.status() == Session::Status::running);
        s.cancel();
        CHECK(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::insufficient_responses);
    }

    SUBCASE("cancelling before the directory answers") {
        Fleet f({"n1", "n2", "n3"}, 0xeb, "client-cancel-early");
        register_user(f, GroupId::toy, "gina", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);
        RecoverSession s("gina", pwd, g, {f.addr("n1")}, f.rng);
        s.start();
        s.cancel();
        CHECK(s.failure_code() == Errc::cancelled);
    }
}

TEST_CASE("registration is all or nothing") {
    Bytes pwd = to_bytes("pw");

    SUBCASE("a node that refuses its share stops the directory publish") {
        Fleet f({"n1", "n2", "n3"}, 0xec, "client-atomic");
        // n2 already holds a record for alice under someone else's key
        register_user(f, GroupId::ristretto, "alice", to_bytes("other"), to_bytes("y"),
                      {f.addr("n2")}, 0);

        RegistrationPlan plan;
        plan.username = "alice";
        plan.password = pwd;
        plan.payload = to_bytes("z");
        plan.committee = f.addrs({"n1", "n2", "n3"});
        plan.threshold = 1;
        RegisterSession s(plan, f.rng);
        f.drive(s);
        REQUIRE(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::node_rejected);
        CHECK(s.sensitive_cleared());

        // no replica ever saw a directory entry naming the new committee
        for (auto& [id, node] : f.by_id) {
            auto got = node_expect<DirectoryGetResponse>(*node, DirectoryGet{"alice"}, f.rng);
            if (got.present) CHECK(got.entry.committee.size() == 1);
        }
    }

    SUBCASE("a directory replica that refuses the entry fails the session") {
        Fleet f({"n1", "n2"}, 0xed, "client-dirreject");
        // n2's directory already pins alice at version 5 under another key
        SigningKeypair other = SigningKeypair::generate(f.rng);
        DirectoryEntry stale;
        stale.username = "alice";
        stale.user_pubkey = other.pk;
        stale.version = 5;
        stale.committee = {{"n9", "mem:n9", 1}};
        stale.threshold = 0;
        stale.sign(other.sk);
        node_expect<DirectoryPutAck>(f.node("n2"), DirectoryPut{stale}, f.rng);

        RegistrationPlan plan;
        plan.username = "alice";
        plan.password = pwd;
        plan.payload = to_bytes("z");
        plan.committee = f.addrs({"n1", "n2"});
        plan.threshold = 1;
        RegisterSession s(plan, f.rng);
        f.drive(s);
        REQUIRE(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::directory_rejected);
    }

    SUBCASE("plans that cannot reach a quorum are refused before any traffic") {
        Fleet f({"n1", "n2"}, 0xee, "client-badplan");
        RegistrationPlan plan;
        plan.username = "alice";
        plan.password = pwd;
        plan.committee = f.addrs({"n1", "n2"});
        plan.threshold = 2; // needs three nodes
        RegisterSession s(plan, f.rng);
        CHECK(s.start().empty());
        CHECK(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::insufficient_indices);

        RegistrationPlan nopw;
        nopw.username = "alice";
        nopw.committee = f.addrs({"n1", "n2"});
        nopw.threshold = 1;
        RegisterSession s2(nopw, f.rng);
        CHECK(s2.start().empty());
        CHECK(s2.failure_code() == Errc::scenario_error);
    }
}

TEST_CASE("minimal committee of t+1 nodes round-trips") {
    Fleet f({"n1", "n2"}, 0xef, "client-minimal");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("tiny committee");
    register_user(f, GroupId::ristretto, "henry", pwd, payload, f.addrs({"n1", "n2"}), 1);
    auto got = recover_user(f, ristretto_group(), "henry", pwd, {f.addr("n2")});
    CHECK(got.payload == payload);
}

TEST_CASE("proactive refresh keeps the secret while replacing every share") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xf1, "client-refresh");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("steady secret");
    auto committee = f.addrs({"n1", "n2", "n3"});
    SigningKeypair key = register_user(f, GroupId::toy, "alice", pwd, payload, committee, 1);

    std::map<std::string, Scalar> before;
    for (auto& [id, node] : f.by_id) before[id] = node->record("alice")->share.value;

    RotationPlan plan;
    plan.username = "alice";
    plan.user_key = key;
    plan.group = GroupId::toy;
    plan.bootstrap = {f.addr("n1")};
    plan.new_committee = committee;
    plan.new_threshold = 1;
    RotateSession s(plan, f.rng);
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);
    CHECK(s.new_epoch() == 1);
    CHECK(s.new_version() == 2);

    bool any_changed = false;
    for (auto& [id, node] : f.by_id) {
        const UserRecord* rec = node->record("alice");
        REQUIRE(rec != nullptr);
        CHECK(rec->share.epoch == 1);
        CHECK(rec->directory_version == 2);
        any_changed |= !(rec->share.value == before[id]);
    }
    CHECK(any_changed); // same secret, fresh polynomial

    auto got = recover_user(f, g, "alice", pwd, {f.addr("n3")});
    CHECK(got.payload == payload);
    CHECK(got.key.pk == key.pk);
}

TEST_CASE("rotation moves a user to a disjoint committee") {
    const Group& g = ristretto_group();
    Fleet f({"n1", "n2", "n3", "n4", "n5", "n6"}, 0xf2, "client-disjoint");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("movable secret");
    register_user(f, GroupId::ristretto, "bob", pwd, payload, f.addrs({"n1", "n2", "n3"}), 1);

    // the signing key recovered from the backup authorizes the rotation
    auto recovered = recover_user(f, g, "bob", pwd, {f.addr("n1")});

    RotationPlan plan;
    plan.username = "bob";
    plan.user_key = recovered.key;
    plan.bootstrap = {f.addr("n2")};
    plan.new_committee = f.addrs({"n4", "n5", "n6"});
    plan.new_threshold = 2;
    RotateSession s(plan, f.rng);
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);
    CHECK(s.new_epoch() == 1);

    // old nodes kept nothing recoverable
    for (const std::string& id : {"n1", "n2", "n3"}) {
        CHECK(f.node(id).record("bob") == nullptr);
        Envelope env = node_call(f.node(id), RecoveryRequest{"bob", g.encode_element(g.generator())},
                                 f.rng, "probe");
        auto* err = std::get_if<ErrorResponse>(&env.body);
        REQUIRE(err != nullptr);
        CHECK(err->errc() == Errc::unknown_user);
    }
    // new nodes serve the raised threshold at epoch 1
    for (const std::string& id : {"n4", "n5", "n6"}) {
        const UserRecord* rec = f.node(id).record("bob");
        REQUIRE(rec != nullptr);
        CHECK(rec->share.epoch == 1);
        CHECK(rec->share.threshold == 2);
        CHECK(rec->user_pubkey == recovered.key.pk);
    }

    // a departed node still answers the directory lookup with the new committee
    auto got = recover_user(f, g, "bob", pwd, {f.addr("n1")});
    CHECK(got.payload == payload);
    CHECK(got.key.pk == recovered.key.pk);
}

TEST_CASE("rotation can drop the threshold to zero for single-node recovery") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xf3, "client-tzero");
    Bytes pwd = to_bytes("pw");
    Bytes payload = to_bytes("solo recovery");
    SigningKeypair key =
        register_user(f, GroupId::toy, "carol", pwd, payload, f.addrs({"n1", "n2"}), 1);

    RotationPlan plan;
    plan.username = "carol";
    plan.user_key = key;
    plan.group = GroupId::toy;
    plan.bootstrap = {f.addr("n1")};
    plan.new_committee = {f.addr("n3")};
    plan.new_threshold = 0;
    RotateSession s(plan, f.rng);
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);

    CHECK(f.node("n1").record("carol") == nullptr);
    CHECK(f.node("n2").record("carol") == nullptr);
    const UserRecord* rec = f.node("n3").record("carol");
    REQUIRE(rec != nullptr);
    CHECK(rec->share.threshold == 0);

    // one response now reconstructs the whole secret
    auto got = recover_user(f, g, "carol", pwd, {f.addr("n2")});
    CHECK(got.payload == payload);
}

TEST_CASE("rotation refuses bad authorization and bad contributor sets") {
    const Group& g = toy_group();
    Fleet f({"n1", "n2", "n3"}, 0xf4, "client-rotbad");
    Bytes pwd = to_bytes("pw");
    SigningKeypair key =
        register_user(f, GroupId::toy, "dave", pwd, to_bytes("x"), f.addrs({"n1", "n2", "n3"}), 1);

    RotationPlan plan;
    plan.username = "dave";
    plan.user_key = key;
    plan.group = GroupId::toy;
    plan.bootstrap = {f.addr("n1")};
    plan.new_committee = f.addrs({"n1", "n2", "n3"});
    plan.new_threshold = 1;

    SUBCASE("a key other than the directory pin cannot rotate") {
        plan.user_key = SigningKeypair::generate(f.rng);
        RotateSession s(plan, f.rng);
        f.drive(s);
        REQUIRE(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::bad_authorization);
    }
    SUBCASE("contributor sets must be t_old+1 distinct old members") {
        for (std::vector<uint32_t> bad : {std::vector<uint32_t>{1},
                                          std::vector<uint32_t>{1, 1},
                                          std::vector<uint32_t>{1, 9},
                                          std::vector<uint32_t>{1, 2, 3}}) {
            plan.contributors = bad;
            RotateSession s(plan, f.rng);
            f.drive(s);
            REQUIRE(s.status() == Session::Status::failed);
            CHECK(s.failure_code() == Errc::insufficient_contributors);
        }
    }
    SUBCASE("a new committee smaller than t_new+1 never starts") {
        plan.new_committee = {f.addr("n3")};
        RotateSession s(plan, f.rng);
        CHECK(s.start().empty());
        CHECK(s.failure_code() == Errc::insufficient_indices);
    }
    SUBCASE("rotating an unknown user reports NotFound") {
        plan.username = "nobody";
        RotateSession s(plan, f.rng);
        f.drive(s);
        REQUIRE(s.status() == Session::Status::failed);
        CHECK(s.failure_code() == Errc::not_found);
    }
    SUBCASE("explicit contributor choice is honored") {
        plan.contributors = {2, 3};
        RotateSession s(plan, f.rng);
        f.drive(s);
        REQUIRE(s.status() == Session::Status::succeeded);
        auto got = recover_user(f, g, "dave", pwd, {f.addr("n1")});
        CHECK(got.payload == to_bytes("x"));
    }
}

TEST_CASE("sessions leave a readable trace") {
    Fleet f({"n1", "n2"}, 0xf5, "client-trace");
    RegistrationPlan plan;
    plan.username = "trace";
    plan.password = to_bytes("pw");
    plan.payload = to_bytes("x");
    plan.committee = f.addrs({"n1", "n2"});
    plan.threshold = 1;
    RegisterSession s(plan, f.rng);
    f.drive(s);
    REQUIRE(s.status() == Session::Status::succeeded);
    // four request/response pairs: two registrations, two directory puts
    REQUIRE(s.trace().size() == 8);
    CHECK(s.trace()[0].substr(0, 5) == "-> n1");
    bool saw_ack = false;
    for (const std::string& line : s.trace())
        saw_ack |= line.find("RegisterAck") != std::string::npos;
    CHECK(saw_ack);
}
