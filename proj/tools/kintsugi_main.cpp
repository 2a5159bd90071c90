#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "kintsugi/netsim.hpp"
#include "kintsugi/transport.hpp"

using namespace kintsugi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitProtocol = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

Bytes read_file_bytes(const std::string& path) {
    if (path == "-") {
        Bytes out;
        char buf[4096];
        while (std::cin.read(buf, sizeof buf) || std::cin.gcount() > 0)
            out.insert(out.end(), buf, buf + std::cin.gcount());
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::scenario_error, "cannot read " + path);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// passwords come from a file or stdin, never argv; one trailing newline is
// editor noise, not password material
Bytes read_password(const std::string& path) {
    Bytes raw = read_file_bytes(path);
    if (!raw.empty() && raw.back() == '\n') raw.pop_back();
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) fail(Errc::scenario_error, "empty password in " + path);
    return raw;
}

void write_file_bytes(const std::string& path, ByteSpan data) {
    if (path == "-") {
        std::cout.write(reinterpret_cast<const char*>(data.data()),
                        static_cast<std::streamsize>(data.size()));
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::scenario_error, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) fail(Errc::scenario_error, "short write to " + path);
}

// "n1=127.0.0.1:9001,n2=127.0.0.1:9002" in listed order
std::vector<NodeAddress> parse_nodes(const std::string& spec) {
    std::vector<NodeAddress> out;
    size_t at = 0;
    while (at < spec.size()) {
        size_t comma = spec.find(',', at);
        std::string item = spec.substr(at, comma == std::string::npos ? comma : comma - at);
        at = comma == std::string::npos ? spec.size() : comma + 1;
        size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(Errc::scenario_error, "node spec must be id=host:port, got: " + item);
        NodeAddress addr{item.substr(0, eq), item.substr(eq + 1)};
        split_address(addr.address); // validate
        out.push_back(std::move(addr));
    }
    if (out.empty()) fail(Errc::scenario_error, "empty node list");
    return out;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    size_t at = 0;
    while (at <= csv.size() && !csv.empty()) {
        size_t comma = csv.find(',', at);
        out.push_back(csv.substr(at, comma == std::string::npos ? comma : comma - at));
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return out;
}

GroupId parse_group(const std::string& name) {
    if (name == "toy") return GroupId::toy;
    if (name == "ristretto") return GroupId::ristretto;
    fail(Errc::scenario_error, "unknown group: " + name);
}

SigningKeypair read_key_file(const std::string& path) {
    Bytes raw = read_file_bytes(path);
    std::string hex(raw.begin(), raw.end());
    while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
    Bytes sk = hex_decode(hex);
    if (sk.size() != 64) fail(Errc::scenario_error, "key file must hold 64 hex-encoded bytes");
    SigningKeypair key;
    std::copy(sk.begin(), sk.end(), key.sk.begin());
    std::copy(sk.begin() + 32, sk.end(), key.pk.begin());
    wipe(sk);
    return key;
}

void write_key_file(const std::string& path, const SigningKeypair& key) {
    std::string hex = hex_encode(key.sk) + "\n";
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::scenario_error, "cannot write " + path);
    out << hex;
}

// drives the session and maps its verdict to an exit code + stderr diagnostic
int finish(Session& session, uint64_t timeout_ms, const std::string& doing) {
    drive_session_tcp(session, TcpOptions{timeout_ms});
    if (session.status() == Session::Status::succeeded) return kExitOk;
    if (session.failure_code() == Errc::decryption_failed)
        std::cerr << "decryption failed\n";
    else
        std::cerr << doing << " failed: " << session.failure_detail() << " ["
                  << errc_name(session.failure_code()) << "]\n";
    return kExitProtocol;
}

int cmd_node_run(const std::string& config_path) {
    DaemonConfig cfg = load_daemon_config(config_path);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    run_node_daemon(cfg, g_stop, [&](uint16_t port) {
        std::cerr << "node " << cfg.node.node_id << " listening on 127.0.0.1:" << port << "\n";
    });
    return kExitOk;
}

struct RegisterArgs {
    std::string user, password_file, payload_file, nodes, group = "ristretto", key_out;
    uint32_t threshold = 3;
    uint64_t timeout_ms = 15000;
};

int cmd_register(const RegisterArgs& a) {
    RegistrationPlan plan;
    plan.username = a.user;
    plan.password = read_password(a.password_file);
    plan.payload = read_file_bytes(a.payload_file);
    plan.group = parse_group(a.group);
    plan.committee = parse_nodes(a.nodes);
    plan.threshold = a.threshold;
    SystemRng rng;
    RegisterSession session(plan, rng);
    size_t n = plan.committee.size();
    int rc = finish(session, a.timeout_ms, "register");
    if (rc != kExitOk) return rc;
    // the signing key is also sealed inside the backup, so losing this file
    // only means recovering before the next rotation
    if (!a.key_out.empty()) write_key_file(a.key_out, session.user_key());
    std::cout << "registered " << a.user << " (threshold " << a.threshold << " of " << n << ")";
    if (!a.key_out.empty()) std::cout << ", key saved to " << a.key_out;
    std::cout << "\n";
    return kExitOk;
}

struct RecoverArgs {
    std::string user, password_file, out, nodes, group = "ristretto", exclude, key_out;
    uint64_t timeout_ms = 15000;
};

int cmd_recover(const RecoverArgs& a) {
    std::set<std::string> exclude;
    for (const std::string& id : split_csv(a.exclude)) exclude.insert(id);
    std::vector<NodeAddress> bootstrap = parse_nodes(a.nodes);
    SystemRng rng;
    RecoverSession session(a.user, read_password(a.password_file), group_for(parse_group(a.group)),
                           std::move(bootstrap), rng, std::move(exclude));
    int rc = finish(session, a.timeout_ms, "recover");
    if (rc != kExitOk) return rc;
    write_file_bytes(a.out, session.result().payload);
    if (!a.key_out.empty()) write_key_file(a.key_out, session.result().key);
    if (a.out != "-")
        std::cout << "recovered " << session.result().payload.size() << " bytes to " << a.out
                  << "\n";
    return kExitOk;
}

struct RotateArgs {
    std::string user, key_file, new_nodes, nodes, group = "ristretto", contributors;
    uint32_t new_threshold = 0;
    uint64_t timeout_ms = 15000;
};

int cmd_rotate(const RotateArgs& a) {
    RotationPlan plan;
    plan.username = a.user;
    plan.user_key = read_key_file(a.key_file);
    plan.group = parse_group(a.group);
    plan.bootstrap = parse_nodes(a.nodes);
    plan.new_committee = parse_nodes(a.new_nodes);
    plan.new_threshold = a.new_threshold;
    for (const std::string& c : split_csv(a.contributors)) {
        try {
            plan.contributors.push_back(static_cast<uint32_t>(std::stoul(c)));
        } catch (const std::exception&) {
            fail(Errc::scenario_error, "contributors must be share indices, got: " + c);
        }
    }
    SystemRng rng;
    RotateSession session(plan, rng);
    int rc = finish(session, a.timeout_ms, "rotate");
    if (rc == kExitOk)
        std::cout << "rotated " << a.user << " to " << plan.new_committee.size()
                  << " nodes (threshold " << a.new_threshold << ")\n";
    return rc;
}

struct SimulateArgs {
    std::string scenario, out;
    uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_simulate(const SimulateArgs& a) {
    Scenario sc = load_scenario(a.scenario);
    if (a.seed_set) sc.config.seed = a.seed;
    Simulation sim(sc.config);
    sim.run(sc.actions);
    std::string transcript = sim.transcript();
    if (a.out.empty() || a.out == "-")
        std::cout << transcript;
    else
        write_file_bytes(a.out, ByteSpan(reinterpret_cast<const uint8_t*>(transcript.data()),
                                         transcript.size()));
    if (!sim.all_expectations_met()) {
        for (const ActionOutcome& o : sim.outcomes())
            if (!o.expect_ok)
                std::cerr << "expectation failed: " << o.label << " -> " << o.result << "\n";
        return kExitProtocol;
    }
    return kExitOk;
}

struct AttackArgs {
    std::string scenario, curious, dict, user;
};

int cmd_attack(const AttackArgs& a) {
    Scenario sc = load_scenario(a.scenario);
    Simulation sim(sc.config);
    sim.run(sc.actions);

    std::string user = a.user;
    if (user.empty()) {
        std::vector<std::string> users = sim.registered_users();
        if (users.size() != 1)
            fail(Errc::scenario_error,
                 "scenario registered " + std::to_string(users.size()) +
                     " users; pick one with --user");
        user = users.front();
    }

    std::set<std::string> curious;
    for (const std::string& id : split_csv(a.curious)) curious.insert(id);

    std::vector<Bytes> dict;
    {
        std::ifstream in(a.dict);
        if (!in) fail(Errc::scenario_error, "cannot read dictionary: " + a.dict);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) dict.push_back(to_bytes(line));
        }
    }
    if (dict.empty()) fail(Errc::scenario_error, "dictionary is empty");

    AttackResult r = collusion_oracle(sim, user, curious, dict);
    std::cout << "target user: " << user << "\n";
    std::cout << "colluding nodes: " << a.curious << "\n";
    std::cout << "dictionary size: " << dict.size() << "\n";
    std::cout << "secret reconstructed: " << (r.recovered_secret ? "yes" : "no") << "\n";
    std::cout << "password identified: "
              << (r.matched_password
                      ? std::string(r.matched_password->begin(), r.matched_password->end())
                      : std::string("no"))
              << "\n";
    std::cout << "dictionary words still consistent: " << r.consistent.size() << " of "
              << dict.size() << "\n";
    std::cout << (r.succeeded ? "attack succeeded\n" : "attack failed\n");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kintsugi: password-protected secret sharing over threshold OPRF"};
    app.require_subcommand(1);

    // node run
    auto* node = app.add_subcommand("node", "storage node daemon");
    node->require_subcommand(1);
    auto* run = node->add_subcommand("run", "serve a node over TCP");
    std::string config_path;
    run->add_option("--config", config_path, "daemon config JSON")->required();

    // register
    RegisterArgs reg;
    auto* reg_cmd = app.add_subcommand("register", "split a secret across a committee");
    reg_cmd->add_option("--user", reg.user)->required();
    reg_cmd->add_option("--password-file", reg.password_file, "password file, or - for stdin")
        ->required();
    reg_cmd->add_option("--payload-file", reg.payload_file, "secret payload to protect")
        ->required();
    reg_cmd->add_option("--nodes", reg.nodes, "committee as id=host:port,... (share order)")
        ->required();
    reg_cmd->add_option("--threshold", reg.threshold, "t: any t+1 shares recover")->required();
    reg_cmd->add_option("--group", reg.group, "toy | ristretto (default ristretto)");
    reg_cmd->add_option("--key-out", reg.key_out, "save the signing key here (hex)");
    reg_cmd->add_option("--timeout-ms", reg.timeout_ms);

    // recover
    RecoverArgs rec;
    auto* rec_cmd = app.add_subcommand("recover", "recover a payload with the password");
    rec_cmd->add_option("--user", rec.user)->required();
    rec_cmd->add_option("--password-file", rec.password_file, "password file, or - for stdin")
        ->required();
    rec_cmd->add_option("--out", rec.out, "payload destination, or - for stdout")->required();
    rec_cmd->add_option("--nodes", rec.nodes, "directory bootstrap as id=host:port,...")
        ->required();
    rec_cmd->add_option("--group", rec.group);
    rec_cmd->add_option("--exclude", rec.exclude, "node ids to avoid (comma separated)");
    rec_cmd->add_option("--key-out", rec.key_out, "also save the recovered signing key");
    rec_cmd->add_option("--timeout-ms", rec.timeout_ms);

    // rotate
    RotateArgs rot;
    auto* rot_cmd = app.add_subcommand("rotate", "move a user to a new committee");
    rot_cmd->add_option("--user", rot.user)->required();
    rot_cmd->add_option("--key-file", rot.key_file, "signing key saved at registration")
        ->required();
    rot_cmd->add_option("--new-nodes", rot.new_nodes, "new committee as id=host:port,...")
        ->required();
    rot_cmd->add_option("--new-threshold", rot.new_threshold)->required();
    rot_cmd->add_option("--nodes", rot.nodes, "directory bootstrap as id=host:port,...")
        ->required();
    rot_cmd->add_option("--contributors", rot.contributors,
                        "old share indices that contribute (comma separated)");
    rot_cmd->add_option("--group", rot.group);
    rot_cmd->add_option("--timeout-ms", rot.timeout_ms);

    // simulate
    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "run a scenario in the network simulator");
    sim_cmd->add_option("--scenario", sim.scenario, "scenario JSON file")->required();
    auto* seed_opt = sim_cmd->add_option("--seed", sim.seed, "override the scenario seed");
    sim_cmd->add_option("--out", sim.out, "transcript destination (default stdout)");

    // attack
    AttackArgs atk;
    auto* atk_cmd = app.add_subcommand("attack", "replay the strongest collusion attack");
    atk_cmd->add_option("--scenario", atk.scenario, "scenario JSON file")->required();
    atk_cmd->add_option("--curious", atk.curious, "colluding node ids (comma separated)")
        ->required();
    atk_cmd->add_option("--dict", atk.dict, "dictionary file, one password per line")->required();
    atk_cmd->add_option("--user", atk.user, "target user (default: the only one registered)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_node_run(config_path);
        if (reg_cmd->parsed()) return cmd_register(reg);
        if (rec_cmd->parsed()) return cmd_recover(rec);
        if (rot_cmd->parsed()) return cmd_rotate(rot);
        if (sim_cmd->parsed()) {
            sim.seed_set = seed_opt->count() > 0;
            return cmd_simulate(sim);
        }
        if (atk_cmd->parsed()) return cmd_attack(atk);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == Errc::scenario_error ? kExitUsage : kExitProtocol;
    } catch (const std::exception& e) {
        std::cerr << "internal: " << e.what() << "\n";
        return kExitProtocol;
    }
    return kExitUsage;
}
