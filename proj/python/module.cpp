#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "kintsugi/netsim.hpp"

namespace py = pybind11;
using namespace kintsugi;

namespace {

Bytes as_bytes(const py::bytes& b) {
    std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes to_py(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

Errc errc_from_name(const std::string& name) {
    for (uint16_t i = 1; i <= static_cast<uint16_t>(Errc::internal); ++i) {
        Errc c = static_cast<Errc>(i);
        if (name == errc_name(c)) return c;
    }
    return Errc::internal;
}

// Declarative driver over the simulator: each call appends one action and
// runs it to quiescence, so Python sees the protocol without any transport.
class Cluster {
public:
    Cluster(std::vector<std::string> node_ids, const std::string& group, uint64_t seed,
            uint32_t rate_capacity, double rate_refill_per_hour) {
        SimConfig cfg;
        cfg.seed = seed;
        if (group == "toy")
            cfg.group = GroupId::toy;
        else if (group == "ristretto")
            cfg.group = GroupId::ristretto;
        else
            fail(Errc::scenario_error, "unknown group: " + group);
        cfg.node_ids = std::move(node_ids);
        cfg.rate_capacity = rate_capacity;
        cfg.rate_refill_per_hour = rate_refill_per_hour;
        sim_.emplace(cfg);
    }

    void register_user(const std::string& user, const py::bytes& password,
                       const py::bytes& payload, std::vector<std::string> committee,
                       uint32_t threshold) {
        Action a;
        a.op = Action::Op::register_user;
        a.user = user;
        a.password = as_bytes(password);
        a.payload = as_bytes(payload);
        a.committee = std::move(committee);
        a.threshold = threshold;
        run_or_raise(a);
    }

    py::bytes recover(const std::string& user, const py::bytes& password,
                      std::vector<std::string> bootstrap) {
        Action a;
        a.op = Action::Op::recover;
        a.user = user;
        a.password = as_bytes(password);
        a.bootstrap = std::move(bootstrap);
        return to_py(run_or_raise(a).payload);
    }

    void rotate(const std::string& user, std::vector<std::string> new_committee,
                uint32_t new_threshold, std::vector<std::string> bootstrap,
                std::vector<uint32_t> contributors) {
        Action a;
        a.op = Action::Op::rotate;
        a.user = user;
        a.committee = std::move(new_committee);
        a.threshold = new_threshold;
        a.bootstrap = std::move(bootstrap);
        a.contributors = std::move(contributors);
        run_or_raise(a);
    }

    void set_offline(std::vector<std::string> ids) {
        sim_->set_offline(std::set<std::string>(ids.begin(), ids.end()));
    }

    void advance_clock(uint64_t seconds) {
        Action a;
        a.op = Action::Op::advance;
        a.seconds = seconds;
        sim_->run({a});
    }

    py::dict attack(const std::string& user, std::vector<std::string> curious,
                    std::vector<py::bytes> dictionary) {
        std::vector<Bytes> dict;
        for (const py::bytes& w : dictionary) dict.push_back(as_bytes(w));
        AttackResult r = collusion_oracle(*sim_, user,
                                          std::set<std::string>(curious.begin(), curious.end()),
                                          dict);
        py::dict out;
        out["succeeded"] = r.succeeded;
        out["secret_recovered"] = r.recovered_secret.has_value();
        out["matched_password"] =
            r.matched_password ? py::object(to_py(*r.matched_password)) : py::object(py::none());
        py::list consistent;
        for (const Bytes& w : r.consistent) consistent.append(to_py(w));
        out["consistent"] = consistent;
        return out;
    }

    std::string transcript() const { return sim_->transcript(); }

private:
    const ActionOutcome& run_or_raise(const Action& a) {
        sim_->run({a});
        const ActionOutcome& outcome = sim_->outcomes().back();
        if (outcome.result == "succeeded") return outcome;
        Errc code = Errc::internal;
        if (outcome.result.rfind("failed ", 0) == 0)
            code = errc_from_name(outcome.result.substr(7));
        else if (outcome.result == "timeout")
            code = Errc::cancelled;
        throw Error(code, outcome.label + ": " + outcome.result);
    }

    std::optional<Simulation> sim_;
};

py::dict run_scenario(const std::string& text, std::optional<uint64_t> seed) {
    Scenario sc = parse_scenario(text);
    if (seed) sc.config.seed = *seed;
    Simulation sim(sc.config);
    sim.run(sc.actions);
    py::dict out;
    out["transcript"] = sim.transcript();
    out["expectations_met"] = sim.all_expectations_met();
    py::list outcomes;
    for (const ActionOutcome& o : sim.outcomes()) {
        py::dict d;
        d["label"] = o.label;
        d["result"] = o.result;
        d["payload"] = to_py(o.payload);
        d["expect_ok"] = o.expect_ok;
        outcomes.append(d);
    }
    out["outcomes"] = outcomes;
    return out;
}

} // namespace

PYBIND11_MODULE(_kintsugi, m) {
    m.doc() = "password-protected secret sharing over a threshold OPRF";

    static py::exception<Error> exc(m, "KintsugiError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            exc(e.what());
        }
    });

    py::class_<Cluster>(m, "Cluster",
                        "In-process committee of storage nodes, deterministic under a seed")
        .def(py::init<std::vector<std::string>, const std::string&, uint64_t, uint32_t, double>(),
             py::arg("node_ids"), py::arg("group") = "ristretto", py::arg("seed") = 0,
             py::arg("rate_capacity") = 1000, py::arg("rate_refill_per_hour") = 5.0)
        .def("register_user", &Cluster::register_user, py::arg("user"), py::arg("password"),
             py::arg("payload"), py::arg("committee"), py::arg("threshold"),
             "Split a payload across the committee, keyed by the password")
        .def("recover", &Cluster::recover, py::arg("user"), py::arg("password"),
             py::arg("bootstrap"), "Recover the payload; raises on a wrong password")
        .def("rotate", &Cluster::rotate, py::arg("user"), py::arg("new_committee"),
             py::arg("new_threshold"), py::arg("bootstrap"),
             py::arg("contributors") = std::vector<uint32_t>{},
             "Re-share onto a new committee without changing the password")
        .def("set_offline", &Cluster::set_offline, py::arg("node_ids"))
        .def("advance_clock", &Cluster::advance_clock, py::arg("seconds"))
        .def("attack", &Cluster::attack, py::arg("user"), py::arg("curious"),
             py::arg("dictionary"),
             "Strongest offline dictionary attack available to colluding nodes")
        .def("transcript", &Cluster::transcript);

    m.def("run_scenario", &run_scenario, py::arg("text"), py::arg("seed") = std::nullopt,
          "Run a scenario JSON document in the deterministic simulator");
}
