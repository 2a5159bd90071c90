#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kintsugi/client.hpp"
#include "kintsugi/node.hpp"

namespace kintsugi {

// Deterministic single-threaded network simulator. Nodes and client sessions
// run as callbacks under a virtual-tick scheduler; all randomness (delays,
// duplication, key material, blinds) is drawn from one seeded stream, so a
// (seed, scenario) pair always yields a byte-identical transcript.

struct DelayModel {
    enum class Kind { uniform, heavy_tail };
    Kind kind = Kind::uniform;
    uint64_t min = 1;
    uint64_t max = 1; // inclusive; heavy_tail doubles from min, capped here
};

// Declarative tamper rule for scenario files; compiled to a TamperRule.
struct TamperSpec {
    std::string kind; // corrupt_evaluation | corrupt_entry | flip_byte | none
    std::string node; // match messages from/to this node; empty = any
    size_t count = 1; // matches to mutate; 0 = unlimited
};

// In-flight mutation hook. Returns the replacement envelope, or nullopt to
// pass the message through untouched. Must be pure: same input, same output.
struct TamperRule {
    std::string name;
    std::function<std::optional<Bytes>(const std::string& from, const std::string& to,
                                       const Bytes& envelope)>
        mutate;
    size_t budget = 1; // decremented per mutation; 0 disables the rule
};

struct SimConfig {
    uint64_t seed = 0;
    GroupId group = GroupId::toy;
    std::vector<std::string> node_ids;
    DelayModel delay;
    std::set<std::string> offline; // receive nothing, send nothing
    std::set<std::string> curious; // protocol-conformant; pooled by the oracle
    bool duplicate = false;        // deliveries may arrive a second time
    bool reorder = true;           // false forces per-link FIFO delivery
    uint64_t tick_bound = 50000;
    uint32_t rate_capacity = 5;
    double rate_refill_per_hour = 5.0;
    std::vector<TamperSpec> tampers;
};

struct Action {
    enum class Op { register_user, recover, rotate, advance, probe };
    Op op{};
    std::string user;
    Bytes password;
    Bytes payload;
    std::vector<std::string> committee; // register committee / rotate new committee
    std::vector<std::string> bootstrap; // recover and rotate lookup targets
    std::vector<std::string> exclude;   // recover: committee members not to contact
    uint32_t threshold = 0;
    std::vector<uint32_t> contributors; // rotate; empty = session default
    uint64_t seconds = 0;               // advance: simulated rate-limit clock
    std::string source;                 // probe: rate-limit bucket key
    std::string node;                   // probe: target node
    // "" = no expectation; otherwise "success", "timeout", an error name such
    // as "DecryptionFailed" or "NotFound", or for probes the literal response
    // line, e.g. "response ErrorResponse(RateLimited)"
    std::string expect;
};

struct Scenario {
    SimConfig config;
    std::vector<Action> actions;
};

// Parses the JSON scenario format (see README). ScenarioError on anything
// malformed; unknown keys are rejected so typos cannot silently no-op.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

struct ActionOutcome {
    std::string label;  // e.g. "recover alice"
    std::string result; // succeeded | failed <ErrName> | timeout | response <MsgName>
    Bytes payload;      // recovered payload, when the action yields one
    bool expect_ok = true;
};

// Outcome of replaying the strongest offline attack available to a set of
// colluding nodes against one user's password.
struct AttackResult {
    bool succeeded = false;
    std::vector<Bytes> consistent; // dictionary words the colluders cannot rule out
    std::optional<Scalar> recovered_secret;
    std::optional<Bytes> matched_password;
};

class Simulation {
public:
    explicit Simulation(SimConfig cfg);

    // Installs a C++ tamper hook (scenario files use TamperSpec instead).
    void add_tamper(TamperRule rule);

    // Replaces the offline set mid-run, e.g. to fault a node only after
    // registration finished. Messages already queued to a newly offline node
    // are dropped at delivery time.
    void set_offline(std::set<std::string> ids);

    // Executes actions in order. Blocking actions (register/recover/rotate)
    // pump the scheduler until the session settles, traffic drains, or the
    // tick bound hits; afterwards the queue is drained to quiescence.
    // ScenarioError on references to unknown nodes or unregistered users.
    void run(const std::vector<Action>& actions);

    const std::vector<ActionOutcome>& outcomes() const { return outcomes_; }
    bool all_expectations_met() const;

    // Full deterministic rendering: header, event log, outcomes, final state.
    std::string transcript() const;

    Node& node(const std::string& id);
    const Node& node(const std::string& id) const;
    const Group& group() const { return g_; }
    uint64_t now() const { return now_; }
    SimClock& clock() { return clock_; }
    Rng& rng() { return rng_; }
    // Signing key captured from this sim's successful registration of `user`;
    // null if the scenario never registered them.
    const SigningKeypair* user_key(const std::string& user) const;
    const Bytes* registered_payload(const std::string& user) const;
    std::vector<std::string> registered_users() const;

private:
    struct Pending {
        std::string from, to;
        Bytes bytes;
        bool is_duplicate = false;
    };

    void schedule(const std::string& from, const std::string& to, Bytes bytes);
    void deliver_next(Session* session);
    void pump(Session& session);
    void drain();
    Bytes apply_tampers(const std::string& from, const std::string& to, Bytes bytes);
    std::vector<NodeAddress> resolve(const std::vector<std::string>& ids) const;
    uint64_t draw_delay();
    void note(std::string line) { lines_.push_back(std::move(line)); }

    SimConfig cfg_;
    const Group& g_;
    DeterministicRng rng_;
    SimClock clock_;
    std::map<std::string, std::unique_ptr<Node>> nodes_;
    std::map<std::pair<uint64_t, uint64_t>, Pending> queue_; // (tick, seq) total order
    std::map<std::string, uint64_t> link_floor_;             // FIFO mode: min next tick per link
    uint64_t now_ = 0;
    uint64_t seq_ = 0;
    std::vector<TamperRule> tampers_;
    std::vector<std::string> lines_;
    std::vector<ActionOutcome> outcomes_;
    std::map<std::string, SigningKeypair> keys_;
    std::map<std::string, Bytes> payloads_;
};

// Replays the strongest offline brute-force attack available to `curious`:
// pooled shares at the newest epoch, plus the sealed backup they all store.
// With t+1 or more distinct shares the secret is interpolated and exactly one
// dictionary word opens the backup. With t or fewer, every word remains
// consistent: over the toy group this is demonstrated exhaustively (for each
// word, some candidate secret in the field explains the backup); over large
// groups it holds by Shamir perfect secrecy, with no scan possible or needed.
AttackResult collusion_oracle(const Simulation& sim, const std::string& username,
                              const std::set<std::string>& curious,
                              const std::vector<Bytes>& dictionary);

} // namespace kintsugi
