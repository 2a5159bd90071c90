#include "kintsugi/netsim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kintsugi/hash.hpp"
#include "kintsugi/oprf.hpp"

namespace kintsugi {

namespace {

using nlohmann::json;

const char* type_label(const Bytes& envelope) {
    if (envelope.size() < 2) return "Short";
    uint8_t t = envelope[1];
    if (t < 0x01 || t > 0x11) return "Unknown";
    return msg_type_name(static_cast<MsgType>(t));
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const std::string& p : parts) {
        if (!out.empty()) out += ",";
        out += p;
    }
    return out;
}

std::string join(const std::set<std::string>& parts) {
    return join(std::vector<std::string>(parts.begin(), parts.end()));
}

std::string hex(ByteSpan b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (uint8_t v : b) {
        out += digits[v >> 4];
        out += digits[v & 0xf];
    }
    return out;
}

// compiles a declarative scenario tamper into an executable rule
TamperRule compile_tamper(const TamperSpec& spec, const Group& g) {
    TamperRule rule;
    rule.name = spec.kind;
    rule.budget = spec.count == 0 ? SIZE_MAX : spec.count;
    std::string node = spec.node;

    if (spec.kind == "corrupt_evaluation") {
        // valid-but-wrong group element: AEAD must catch it end to end
        rule.mutate = [&g, node](const std::string& from, const std::string&,
                                 const Bytes& bytes) -> std::optional<Bytes> {
            if (!node.empty() && from != node) return std::nullopt;
            Envelope env;
            try {
                env = decode_envelope(bytes);
            } catch (const Error&) {
                return std::nullopt;
            }
            const auto* resp = std::get_if<RecoveryResponse>(&env.body);
            if (resp == nullptr) return std::nullopt;
            RecoveryResponse r = *resp;
            try {
                r.evaluated = g.encode_element(g.add(g.decode_element(r.evaluated), g.generator()));
            } catch (const Error&) {
                return std::nullopt;
            }
            return make_envelope(r, env.session);
        };
    } else if (spec.kind == "corrupt_entry") {
        // re-encodes cleanly but no longer matches the user's signature
        rule.mutate = [node](const std::string&, const std::string& to,
                             const Bytes& bytes) -> std::optional<Bytes> {
            if (!node.empty() && to != node) return std::nullopt;
            Envelope env;
            try {
                env = decode_envelope(bytes);
            } catch (const Error&) {
                return std::nullopt;
            }
            const auto* put = std::get_if<DirectoryPut>(&env.body);
            if (put == nullptr) return std::nullopt;
            DirectoryPut p = *put;
            p.entry.threshold += 1;
            return make_envelope(p, env.session);
        };
    } else if (spec.kind == "flip_byte") {
        // blunt corruption of the payload tail; exercises decode rejection
        rule.mutate = [node](const std::string& from, const std::string& to,
                             const Bytes& bytes) -> std::optional<Bytes> {
            if (!node.empty() && from != node && to != node) return std::nullopt;
            if (bytes.size() <= 18) return std::nullopt; // header only, nothing to flip
            Bytes mutated = bytes;
            mutated.back() ^= 0x01;
            return mutated;
        };
    } else if (spec.kind == "none") {
        // installed but never fires; transcript must match an untampered run
        rule.mutate = [](const std::string&, const std::string&,
                         const Bytes&) -> std::optional<Bytes> { return std::nullopt; };
    } else {
        fail(Errc::scenario_error, "unknown tamper kind: " + spec.kind);
    }
    return rule;
}

[[noreturn]] void bad_scenario(const std::string& what) { fail(Errc::scenario_error, what); }

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            bad_scenario(std::string("unknown key \"") + key + "\" in " + where);
    }
}

std::vector<std::string> string_list(const json& j, const char* what) {
    if (!j.is_array()) bad_scenario(std::string(what) + " must be a list of strings");
    std::vector<std::string> out;
    for (const json& v : j) {
        if (!v.is_string()) bad_scenario(std::string(what) + " must be a list of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

Scenario parse_impl(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object()) bad_scenario("scenario is not a JSON object");
    check_keys(root, "scenario",
               {"seed", "group", "nodes", "tick_bound", "rate_capacity", "rate_refill_per_hour",
                "faults", "actions"});

    Scenario sc;
    sc.config.seed = root.value("seed", 0ull);
    std::string group = root.value("group", "toy");
    if (group == "toy")
        sc.config.group = GroupId::toy;
    else if (group == "ristretto")
        sc.config.group = GroupId::ristretto;
    else
        bad_scenario("unknown group: " + group);
    if (!root.contains("nodes")) bad_scenario("scenario needs a nodes list");
    sc.config.node_ids = string_list(root["nodes"], "nodes");
    sc.config.tick_bound = root.value("tick_bound", 50000ull);
    sc.config.rate_capacity = root.value("rate_capacity", 5u);
    sc.config.rate_refill_per_hour = root.value("rate_refill_per_hour", 5.0);

    if (root.contains("faults")) {
        const json& f = root["faults"];
        if (!f.is_object()) bad_scenario("faults must be an object");
        check_keys(f, "faults", {"offline", "curious", "duplicate", "reorder", "delay", "tamper"});
        if (f.contains("offline"))
            for (const std::string& id : string_list(f["offline"], "offline"))
                sc.config.offline.insert(id);
        if (f.contains("curious"))
            for (const std::string& id : string_list(f["curious"], "curious"))
                sc.config.curious.insert(id);
        sc.config.duplicate = f.value("duplicate", false);
        sc.config.reorder = f.value("reorder", true);
        if (f.contains("delay")) {
            const json& d = f["delay"];
            check_keys(d, "delay", {"kind", "min", "max"});
            std::string kind = d.value("kind", "uniform");
            if (kind == "uniform")
                sc.config.delay.kind = DelayModel::Kind::uniform;
            else if (kind == "heavy_tail")
                sc.config.delay.kind = DelayModel::Kind::heavy_tail;
            else
                bad_scenario("unknown delay kind: " + kind);
            sc.config.delay.min = d.value("min", 1ull);
            sc.config.delay.max = d.value("max", sc.config.delay.min);
            if (sc.config.delay.min > sc.config.delay.max)
                bad_scenario("delay min exceeds max");
        }
        if (f.contains("tamper")) {
            if (!f["tamper"].is_array()) bad_scenario("tamper must be a list");
            for (const json& t : f["tamper"]) {
                check_keys(t, "tamper rule", {"kind", "node", "count"});
                TamperSpec spec;
                if (!t.contains("kind")) bad_scenario("tamper rule needs a kind");
                spec.kind = t["kind"].get<std::string>();
                if (spec.kind != "corrupt_evaluation" && spec.kind != "corrupt_entry" &&
                    spec.kind != "flip_byte" && spec.kind != "none")
                    bad_scenario("unknown tamper kind: " + spec.kind);
                spec.node = t.value("node", "");
                spec.count = t.value("count", 1ull);
                sc.config.tampers.push_back(std::move(spec));
            }
        }
    }

    if (!root.contains("actions") || !root["actions"].is_array())
        bad_scenario("scenario needs an actions list");
    for (const json& a : root["actions"]) {
        if (!a.is_object() || !a.contains("op")) bad_scenario("action needs an op");
        Action act;
        std::string op = a["op"].get<std::string>();
        auto str = [&](const char* key) -> std::string {
            if (!a.contains(key))
                bad_scenario("action \"" + op + "\" needs \"" + key + "\"");
            return a[key].get<std::string>();
        };
        if (op == "register") {
            check_keys(a, "register",
                       {"op", "user", "password", "payload", "committee", "threshold", "expect"});
            act.op = Action::Op::register_user;
            act.user = str("user");
            act.password = to_bytes(str("password"));
            act.payload = to_bytes(a.value("payload", ""));
            if (!a.contains("committee")) bad_scenario("register needs a committee");
            act.committee = string_list(a["committee"], "committee");
            if (!a.contains("threshold")) bad_scenario("register needs a threshold");
            act.threshold = a["threshold"].get<uint32_t>();
        } else if (op == "recover") {
            check_keys(a, "recover", {"op", "user", "password", "bootstrap", "exclude", "expect"});
            act.op = Action::Op::recover;
            act.user = str("user");
            act.password = to_bytes(str("password"));
            if (!a.contains("bootstrap")) bad_scenario("recover needs bootstrap nodes");
            act.bootstrap = string_list(a["bootstrap"], "bootstrap");
            if (a.contains("exclude")) act.exclude = string_list(a["exclude"], "exclude");
        } else if (op == "rotate") {
            check_keys(a, "rotate",
                       {"op", "user", "new_committee", "new_threshold", "bootstrap",
                        "contributors", "expect"});
            act.op = Action::Op::rotate;
            act.user = str("user");
            if (!a.contains("new_committee")) bad_scenario("rotate needs a new committee");
            act.committee = string_list(a["new_committee"], "new_committee");
            if (!a.contains("new_threshold")) bad_scenario("rotate needs a new threshold");
            act.threshold = a["new_threshold"].get<uint32_t>();
            if (!a.contains("bootstrap")) bad_scenario("rotate needs bootstrap nodes");
            act.bootstrap = string_list(a["bootstrap"], "bootstrap");
            if (a.contains("contributors"))
                for (const json& c : a["contributors"]) act.contributors.push_back(c.get<uint32_t>());
        } else if (op == "advance") {
            check_keys(a, "advance", {"op", "seconds"});
            act.op = Action::Op::advance;
            if (!a.contains("seconds")) bad_scenario("advance needs seconds");
            act.seconds = a["seconds"].get<uint64_t>();
        } else if (op == "probe") {
            check_keys(a, "probe", {"op", "source", "node", "user", "expect"});
            act.op = Action::Op::probe;
            act.source = str("source");
            act.node = str("node");
            act.user = str("user");
        } else {
            bad_scenario("unknown action op: " + op);
        }
        act.expect = a.value("expect", "");
        sc.actions.push_back(std::move(act));
    }
    return sc;
}

} // namespace

Scenario parse_scenario(const std::string& json_text) {
    try {
        return parse_impl(json_text);
    } catch (const json::exception& e) {
        bad_scenario(std::string("malformed scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bad_scenario("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

// ===== simulation =====

Simulation::Simulation(SimConfig cfg)
    : cfg_(std::move(cfg)), g_(group_for(cfg_.group)), rng_(cfg_.seed, "netsim") {
    if (cfg_.node_ids.empty()) bad_scenario("simulation needs at least one node");
    if (cfg_.delay.min > cfg_.delay.max) bad_scenario("delay min exceeds max");
    for (const std::string& id : cfg_.node_ids) {
        if (id.empty() || id == "c") bad_scenario("bad node id");
        if (nodes_.count(id)) bad_scenario("duplicate node id: " + id);
        NodeConfig nc;
        nc.node_id = id;
        nc.rate_capacity = cfg_.rate_capacity;
        nc.rate_refill_per_hour = cfg_.rate_refill_per_hour;
        nodes_.emplace(id, std::make_unique<Node>(nc, clock_, rng_));
    }
    for (const std::string& id : cfg_.offline)
        if (!nodes_.count(id)) bad_scenario("offline lists unknown node: " + id);
    for (const std::string& id : cfg_.curious)
        if (!nodes_.count(id)) bad_scenario("curious lists unknown node: " + id);
    for (const TamperSpec& spec : cfg_.tampers) tampers_.push_back(compile_tamper(spec, g_));
}

void Simulation::add_tamper(TamperRule rule) { tampers_.push_back(std::move(rule)); }

void Simulation::set_offline(std::set<std::string> ids) {
    for (const std::string& id : ids)
        if (!nodes_.count(id)) bad_scenario("offline lists unknown node: " + id);
    cfg_.offline = std::move(ids);
}

Node& Simulation::node(const std::string& id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) bad_scenario("unknown node: " + id);
    return *it->second;
}

const Node& Simulation::node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) bad_scenario("unknown node: " + id);
    return *it->second;
}

const SigningKeypair* Simulation::user_key(const std::string& user) const {
    auto it = keys_.find(user);
    return it == keys_.end() ? nullptr : &it->second;
}

const Bytes* Simulation::registered_payload(const std::string& user) const {
    auto it = payloads_.find(user);
    return it == payloads_.end() ? nullptr : &it->second;
}

std::vector<std::string> Simulation::registered_users() const {
    std::vector<std::string> out;
    for (const auto& [user, key] : keys_) out.push_back(user);
    return out;
}

std::vector<NodeAddress> Simulation::resolve(const std::vector<std::string>& ids) const {
    std::vector<NodeAddress> out;
    for (const std::string& id : ids) {
        if (!nodes_.count(id)) bad_scenario("action references unknown node: " + id);
        out.push_back(NodeAddress{id, "sim:" + id});
    }
    return out;
}

uint64_t Simulation::draw_delay() {
    if (cfg_.delay.kind == DelayModel::Kind::uniform)
        return cfg_.delay.min + rng_.below(cfg_.delay.max - cfg_.delay.min + 1);
    // heavy tail: geometric doubling from min, capped; most messages are
    // prompt, a few straggle by orders of magnitude
    uint64_t d = std::max<uint64_t>(cfg_.delay.min, 1);
    while (d < cfg_.delay.max && rng_.below(2) == 0) d *= 2;
    return std::min(d, cfg_.delay.max);
}

void Simulation::schedule(const std::string& from, const std::string& to, Bytes bytes) {
    uint64_t tick = now_ + draw_delay();
    if (!cfg_.reorder) {
        // FIFO per link: a message never overtakes an earlier one
        uint64_t& floor = link_floor_[from + ">" + to];
        tick = std::max(tick, floor);
        floor = tick;
    }
    queue_.emplace(std::make_pair(tick, seq_++), Pending{from, to, bytes, false});
    if (cfg_.duplicate && rng_.below(4) == 0)
        queue_.emplace(std::make_pair(now_ + draw_delay(), seq_++), Pending{from, to, std::move(bytes), true});
}

Bytes Simulation::apply_tampers(const std::string& from, const std::string& to, Bytes bytes) {
    for (TamperRule& rule : tampers_) {
        if (rule.budget == 0) continue;
        std::optional<Bytes> mutated = rule.mutate(from, to, bytes);
        if (!mutated) continue;
        --rule.budget;
        note("t=" + std::to_string(now_) + " s=" + std::to_string(seq_) + " tamper " + rule.name +
             " " + from + "->" + to + " " + type_label(bytes));
        bytes = std::move(*mutated);
    }
    return bytes;
}

void Simulation::deliver_next(Session* session) {
    auto it = queue_.begin();
    now_ = std::max(now_, it->first.first);
    Pending p = std::move(it->second);
    queue_.erase(it);

    const char* kind = p.is_duplicate ? "duplicate" : "deliver";
    if (nodes_.count(p.to) && cfg_.offline.count(p.to)) {
        note("t=" + std::to_string(now_) + " s=" + std::to_string(seq_) + " drop " + p.from + "->" +
             p.to + " " + type_label(p.bytes) + " (offline)");
        return;
    }
    p.bytes = apply_tampers(p.from, p.to, std::move(p.bytes));
    note("t=" + std::to_string(now_) + " s=" + std::to_string(seq_) + " " + kind + " " + p.from +
         "->" + p.to + " " + type_label(p.bytes));

    if (auto nit = nodes_.find(p.to); nit != nodes_.end()) {
        Bytes reply = nit->second->handle(p.from, p.bytes);
        schedule(p.to, p.from, std::move(reply));
        return;
    }
    if (session != nullptr)
        for (Outgoing& o : session->on_message(p.from, p.bytes))
            schedule("c", o.dest_id, std::move(o.envelope));
}

void Simulation::pump(Session& session) {
    for (Outgoing& o : session.start()) schedule("c", o.dest_id, std::move(o.envelope));
    while (!session.done() && !queue_.empty() && queue_.begin()->first.first <= cfg_.tick_bound)
        deliver_next(&session);
}

void Simulation::drain() {
    while (!queue_.empty() && queue_.begin()->first.first <= cfg_.tick_bound) deliver_next(nullptr);
}

void Simulation::run(const std::vector<Action>& actions) {
    for (size_t i = 0; i < actions.size(); ++i) {
        const Action& act = actions[i];
        ActionOutcome outcome;

        switch (act.op) {
        case Action::Op::advance: {
            clock_.advance(act.seconds);
            note("t=" + std::to_string(now_) + " clock +" + std::to_string(act.seconds) + " = " +
                 std::to_string(clock_.now()));
            outcome.label = "advance";
            outcome.result = "clock " + std::to_string(clock_.now());
            break;
        }
        case Action::Op::probe: {
            outcome.label = "probe " + act.source + "->" + act.node + " " + act.user;
            if (!nodes_.count(act.node)) bad_scenario("probe targets unknown node: " + act.node);
            if (cfg_.offline.count(act.node)) {
                outcome.result = "offline";
            } else {
                RecoveryRequest req{act.user, g_.encode_element(g_.generator())};
                Bytes reply =
                    nodes_.at(act.node)->handle(act.source, make_envelope(req, random_session_id(rng_)));
                Envelope env = decode_envelope(reply);
                if (const auto* err = std::get_if<ErrorResponse>(&env.body))
                    outcome.result = std::string("response ErrorResponse(") + errc_name(err->errc()) + ")";
                else
                    outcome.result = std::string("response ") + type_label(reply);
            }
            note("t=" + std::to_string(now_) + " " + outcome.label + " -> " + outcome.result);
            break;
        }
        case Action::Op::register_user: {
            outcome.label = "register " + act.user;
            note("-- action " + std::to_string(i) + " " + outcome.label);
            RegistrationPlan plan;
            plan.username = act.user;
            plan.password = act.password;
            plan.payload = act.payload;
            plan.group = cfg_.group;
            plan.committee = resolve(act.committee);
            plan.threshold = act.threshold;
            RegisterSession s(plan, rng_);
            pump(s);
            if (s.status() == Session::Status::succeeded) {
                outcome.result = "succeeded";
                keys_[act.user] = s.user_key();
                payloads_[act.user] = act.payload;
            } else if (s.status() == Session::Status::failed) {
                outcome.result = std::string("failed ") + errc_name(s.failure_code());
            } else {
                s.cancel();
                outcome.result = "timeout";
            }
            break;
        }
        case Action::Op::recover: {
            outcome.label = "recover " + act.user;
            note("-- action " + std::to_string(i) + " " + outcome.label);
            std::set<std::string> exclude;
            for (const std::string& id : act.exclude) {
                if (!nodes_.count(id)) bad_scenario("unknown exclude node: " + id);
                exclude.insert(id);
            }
            RecoverSession s(act.user, act.password, g_, resolve(act.bootstrap), rng_, exclude);
            pump(s);
            if (s.status() == Session::Status::succeeded) {
                outcome.result = "succeeded";
                outcome.payload = s.result().payload;
            } else if (s.status() == Session::Status::failed) {
                outcome.result = std::string("failed ") + errc_name(s.failure_code());
            } else {
                s.cancel();
                outcome.result = "timeout";
            }
            break;
        }
        case Action::Op::rotate: {
            outcome.label = "rotate " + act.user;
            note("-- action " + std::to_string(i) + " " + outcome.label);
            auto kit = keys_.find(act.user);
            if (kit == keys_.end())
                bad_scenario("rotate references a user this scenario never registered: " + act.user);
            RotationPlan plan;
            plan.username = act.user;
            plan.user_key = kit->second;
            plan.group = cfg_.group;
            plan.bootstrap = resolve(act.bootstrap);
            plan.new_committee = resolve(act.committee);
            plan.new_threshold = act.threshold;
            plan.contributors = act.contributors;
            RotateSession s(plan, rng_);
            pump(s);
            if (s.status() == Session::Status::succeeded) {
                outcome.result = "succeeded";
            } else if (s.status() == Session::Status::failed) {
                outcome.result = std::string("failed ") + errc_name(s.failure_code());
            } else {
                s.cancel();
                outcome.result = "timeout";
            }
            break;
        }
        }

        // expectation bookkeeping; "success" additionally demands the payload
        // a recovery returns matches what registration stored
        if (!act.expect.empty()) {
            if (act.expect == "success") {
                outcome.expect_ok = outcome.result == "succeeded";
                if (act.op == Action::Op::recover && payloads_.count(act.user))
                    outcome.expect_ok =
                        outcome.expect_ok && outcome.payload == payloads_.at(act.user);
            } else if (act.expect == "timeout") {
                outcome.expect_ok = outcome.result == "timeout";
            } else if (act.op == Action::Op::probe) {
                outcome.expect_ok = outcome.result == act.expect;
            } else {
                outcome.expect_ok = outcome.result == "failed " + act.expect;
            }
        }
        if (act.op != Action::Op::advance && act.op != Action::Op::probe) {
            std::string line = "-- outcome " + std::to_string(i) + " " + outcome.label + ": " +
                               outcome.result;
            if (!outcome.payload.empty()) line += " payload=" + hex(outcome.payload);
            if (!act.expect.empty())
                line += outcome.expect_ok ? " expect=ok" : " expect=MISMATCH(" + act.expect + ")";
            note(std::move(line));
        }
        outcomes_.push_back(std::move(outcome));
    }
    drain();
}

bool Simulation::all_expectations_met() const {
    return std::all_of(outcomes_.begin(), outcomes_.end(),
                       [](const ActionOutcome& o) { return o.expect_ok; });
}

std::string Simulation::transcript() const {
    std::ostringstream out;
    out << "# netsim seed=" << cfg_.seed << " group=" << (cfg_.group == GroupId::toy ? "toy" : "ristretto")
        << " nodes=" << join(cfg_.node_ids) << " offline=" << join(cfg_.offline)
        << " curious=" << join(cfg_.curious) << " duplicate=" << (cfg_.duplicate ? 1 : 0)
        << " reorder=" << (cfg_.reorder ? 1 : 0)
        << " delay=" << (cfg_.delay.kind == DelayModel::Kind::uniform ? "uniform" : "heavy_tail")
        << "[" << cfg_.delay.min << "," << cfg_.delay.max << "]"
        << " bound=" << cfg_.tick_bound << "\n";
    for (const std::string& line : lines_) out << line << "\n";
    out << "-- final clock=" << clock_.now() << " tick=" << now_ << "\n";
    for (const auto& [id, node] : nodes_) {
        out << "node " << id << " records=" << node->record_count() << "\n";
        for (const auto& [user, rec] : node->records())
            out << "  " << user << " index=" << rec.share.index << " epoch=" << rec.share.epoch
                << " threshold=" << rec.share.threshold << " version=" << rec.directory_version
                << " backup=" << rec.backup.size() << "B\n";
        for (const auto& [user, entry] : node->directory().entries) {
            out << "  directory " << user << " v=" << entry.version << " t=" << entry.threshold
                << " committee=";
            std::string sep;
            for (const CommitteeMember& m : entry.committee) {
                out << sep << m.node_id << ":" << m.index;
                sep = ",";
            }
            out << "\n";
        }
    }
    return out.str();
}

// ===== collusion oracle =====

AttackResult collusion_oracle(const Simulation& sim, const std::string& username,
                              const std::set<std::string>& curious,
                              const std::vector<Bytes>& dictionary) {
    const Group& g = sim.group();
    AttackResult result;

    // pool the colluders' stored material for this user
    std::map<uint64_t, std::vector<Share>> by_epoch;
    Bytes backup;
    for (const std::string& id : curious) {
        const UserRecord* rec = sim.node(id).record(username);
        if (rec == nullptr) continue;
        auto& shares = by_epoch[rec->share.epoch];
        bool dup = std::any_of(shares.begin(), shares.end(),
                               [&](const Share& s) { return s.index == rec->share.index; });
        if (!dup) shares.push_back(rec->share);
        backup = rec->backup;
    }
    // pick the epoch where the colluders hold the most shares (newest on ties)
    std::vector<Share> shares;
    for (auto& [epoch, group_shares] : by_epoch)
        if (group_shares.size() >= shares.size()) shares = std::move(group_shares);

    if (shares.empty() || backup.empty()) {
        // nothing captured: no dictionary word can be ruled out
        result.consistent = dictionary;
        return result;
    }
    EncryptedBackup sealed = EncryptedBackup::decode(backup);
    Bytes aad = to_bytes(username);
    auto opens = [&](const Scalar& s, ByteSpan password) {
        BackupKey key = derive_backup_key(g, g.mul(s, g.hash_to_group(password, kDomainPassword)));
        try {
            Bytes plaintext = open_backup(key, sealed, aad);
            wipe(plaintext);
            return true;
        } catch (const Error&) {
            return false;
        }
    };

    uint32_t threshold = shares.front().threshold;
    if (shares.size() >= static_cast<size_t>(threshold) + 1) {
        // enough shares: the secret is determined, so the attack is the
        // offline dictionary scan the protocol exists to prevent
        Scalar s = reconstruct_secret(g, shares);
        result.recovered_secret = s;
        for (const Bytes& word : dictionary)
            if (opens(s, word)) result.consistent.push_back(word);
        result.succeeded = result.consistent.size() == 1;
        if (result.succeeded) result.matched_password = result.consistent.front();
        return result;
    }

    if (const auto* toy = dynamic_cast<const ToyGroup*>(&g)) {
        // t or fewer shares put no constraint on the secret, so every word
        // that any candidate secret can explain stays consistent; the toy
        // field is small enough to demonstrate that exhaustively
        for (const Bytes& word : dictionary) {
            for (uint64_t v = 0; v < toy->order(); ++v) {
                if (opens(g.scalar_from_u64(v), word)) {
                    result.consistent.push_back(word);
                    break;
                }
            }
        }
    } else {
        // Shamir perfect secrecy: with <= t points every constant term is
        // equally likely, so no computation distinguishes dictionary words
        result.consistent = dictionary;
    }
    return result;
}

} // namespace kintsugi
