#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "medsim/harness.hpp"
#include "support/test_protocols.hpp"

using namespace medsim;

namespace {

Circuit sum_circuit(int n, uint32_t /*p*/) {
    Circuit c;
    int acc = c.in(0);
    for (int k = 1; k < n; ++k) acc = c.add(acc, c.in(k));
    c.out(acc);
    return c;
}

std::set<std::string> honest_output_set(const RunResult& r, int n, const std::set<AgentId>& bad) {
    std::set<std::string> outs;
    auto o = outputs(r.history, n);
    for (int i = 1; i <= n; ++i)
        if (!bad.count(i) && o[static_cast<std::size_t>(i)])
            outs.insert(*o[static_cast<std::size_t>(i)]);
    return outs;
}

}  // namespace

TEST_CASE("f_C_eval zeroes the complement") {
    Circuit f = sum_circuit(3, 7);
    std::vector<Fp> x = {Fp(1, 7), Fp(2, 7), Fp(3, 7)};
    CHECK(f_C_eval(f, {1, 3}, x).v == 4);
    CHECK(f_C_eval(f, {1, 2, 3}, x).v == 6);
    CHECK(f_C_eval(f, {}, x).v == 0);
}

TEST_CASE("ideal adversary output profiles") {
    Circuit f = sum_circuit(5, 97);
    std::vector<Fp> x = {Fp(5, 97), Fp(1, 97), Fp(1, 97), Fp(1, 97), Fp(1, 97)};

    SUBCASE("empty T, identity core") {
        IdealAdversary a;
        auto rho = ideal_output(a, f, x, 0);
        for (auto& s : rho) CHECK(s == "1,2,3,4,5|9");
    }
    SUBCASE("input substitution x1 -> 0") {
        IdealAdversary a;
        a.T = {1};
        a.substitute = [](const std::vector<Fp>& xT, uint64_t) {
            return std::vector<Fp>{Fp(0, xT.at(0).p)};
        };
        a.choose_core = [](const std::vector<Fp>&, uint64_t) {
            return std::vector<int>{1, 2, 3, 4, 5};
        };
        auto rho = ideal_output(a, f, x, 3);
        CHECK(rho[1] == "1,2,3,4,5|4");
        CHECK(rho[0] == "1,2,3,4,5|4");  // default malicious output mirrors honest
    }
    SUBCASE("randomized core is a two-point distribution") {
        IdealAdversary a;
        a.T = {1};
        a.choose_core = [](const std::vector<Fp>&, uint64_t r) {
            return r % 2 ? std::vector<int>{1, 2, 3, 4} : std::vector<int>{2, 3, 4, 5};
        };
        std::set<std::string> seen;
        for (uint64_t r = 0; r < 10; ++r) seen.insert(ideal_output(a, f, x, r)[2]);
        CHECK(seen.size() == 2);
    }
}

TEST_CASE("pi_f computes (C, f_C(x))") {
    const int n = 5, t = 1;
    const uint32_t p = 97;
    Circuit f = sum_circuit(n, p);
    auto agents = pi_f_agents(&f, n, t, p);
    std::vector<std::string> inputs = {"", "1", "2", "3", "4", "5"};

    SUBCASE("all honest, prompt delivery") {
        RunFactory fac;
        fac.n = n;
        fac.inputs = inputs;
        fac.make_agent = agents;
        fac.make_policy = [] { return std::make_unique<FairPolicy>(); };
        fac.fuel = 400000;
        RunResult r = run_once(fac, 2);
        REQUIRE(r.status == RunStatus::Completed);
        auto outs = honest_output_set(r, n, {});
        REQUIRE(outs.size() == 1);
        CHECK(*outs.begin() == "1,2,3,4,5|15");
    }
    SUBCASE("delaying agent 5 excludes it from the core") {
        RunFactory fac;
        fac.n = n;
        fac.inputs = inputs;
        fac.make_agent = agents;
        fac.make_policy = [] { return std::make_unique<DelayAgentPolicy>(5); };
        fac.fuel = 400000;
        RunResult r = run_once(fac, 4);
        REQUIRE(r.status == RunStatus::Completed);
        auto outs = honest_output_set(r, n, {});
        REQUIRE(outs.size() == 1);
        CHECK(*outs.begin() == "1,2,3,4|10");
    }
    SUBCASE("byzantine sharer still leaves a common (C, f_C(y)) with y = x off T") {
        RunFactory fac;
        fac.n = n;
        fac.inputs = inputs;
        fac.malicious = {2};
        fac.make_agent = [&](AgentId id) -> std::unique_ptr<AgentProtocol> {
            if (id == 2)
                return std::make_unique<BadVssDealer>(
                    t, p, InstanceLabel{Kind::Vss, 2, 1, 0}, BadVssDealer::Mode::Garbage);
            return agents(id);
        };
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            fac.make_policy = [seed]() -> std::unique_ptr<SchedulerPolicy> {
                if (seed % 2) return std::make_unique<RandomPolicy>();
                return std::make_unique<FairPolicy>();
            };
            fac.fuel = 400000;
            RunResult r = run_once(fac, seed);
            REQUIRE(r.status == RunStatus::Completed);
            auto outs = honest_output_set(r, n, {2});
            REQUIRE(outs.size() == 1);
            // parse "c1,..|v": recompute f_C over x with agent 2 zeroed-or-lied
            std::string s = *outs.begin();
            auto bar = s.find('|');
            std::vector<int> core;
            std::string cur;
            for (char ch : s.substr(0, bar) + ",") {
                if (ch == ',') {
                    if (!cur.empty()) core.push_back(std::stoi(cur));
                    cur.clear();
                } else {
                    cur.push_back(ch);
                }
            }
            uint32_t got = static_cast<uint32_t>(std::stoul(s.substr(bar + 1)));
            // honest members contribute their true inputs
            uint32_t honest_sum = 0;
            bool two_in_core = false;
            for (int j : core) {
                if (j == 2) two_in_core = true;
                else honest_sum += static_cast<uint32_t>(std::stoul(inputs[static_cast<std::size_t>(j)]));
            }
            if (!two_in_core) CHECK(got == honest_sum % p);
            else CHECK((got + p - honest_sum % p) % p < p);  // some y_2, unconstrained
        }
    }
}

TEST_CASE("tau_f mediator answers (C, f_C(x)) after n-t inputs") {
    const int n = 5, t = 1;
    TauF tf = tau_f(n, t, 6);
    RunFactory fac;
    fac.n = n;
    fac.mediator = true;
    fac.inputs = {"", "1", "2", "3", "4", "5"};
    MediatorSpec spec = tf.mediator;
    fac.make_agent = [&](AgentId id) -> std::unique_ptr<AgentProtocol> {
        if (id == kMediator) return std::make_unique<TransducerMediator>(spec);
        return tf.agents(id);
    };
    SUBCASE("prompt delivery reaches everyone") {
        fac.make_policy = [] { return std::make_unique<FairPolicy>(); };
        RunResult r = run_once(fac, 1);
        REQUIRE(r.status == RunStatus::Completed);
        auto outs = honest_output_set(r, n, {});
        REQUIRE(outs.size() == 1);
        CHECK(*outs.begin() == "C31|y15");  // mask 0b11111, 1+2+3+4+5
    }
    SUBCASE("scheduler decides the core: delay agent 5") {
        fac.make_policy = [] { return std::make_unique<DelayAgentPolicy>(5); };
        RunResult r = run_once(fac, 2);
        auto o = outputs(r.history, n);
        for (int i = 1; i <= 4; ++i) {
            REQUIRE(o[static_cast<std::size_t>(i)]);
            CHECK(*o[static_cast<std::size_t>(i)] == "C15|y10");  // mask 0b1111, 1+2+3+4
        }
    }
    SUBCASE("the mediator never replies before n-t inputs") {
        // starve all but two agents' messages: nobody outputs
        fac.make_policy = [] {
            return std::make_unique<ScriptedPolicy>(std::vector<SchedAction>{
                SchedAction::schedule(1), SchedAction::schedule(2),
                SchedAction::deliver(1, 0, 1), SchedAction::deliver(2, 0, 1),
                SchedAction::schedule(0), SchedAction::schedule(0)});
        };
        fac.fuel = 40;  // only the scripted prefix
        RunResult r = run_once(fac, 3);
        CHECK(honest_output_set(r, n, {}).empty());
    }
}

TEST_CASE("compare_distributions distance and verdicts") {
    Distribution a, b;
    a.exact = b.exact = true;
    a.prob[{"0", "0"}] = 1.0;
    b.prob[{"0", "0"}] = 1.0;
    auto rep = compare_distributions(a, b, 0.0);
    CHECK(rep.distance == doctest::Approx(0.0));
    CHECK(rep.pass);

    Distribution c, d;
    c.prob[{"0", "0"}] = 0.5;
    c.prob[{"1", "1"}] = 0.5;
    d.prob[{"0", "0"}] = 1.0;
    auto rep2 = compare_distributions(c, d, 0.5);
    CHECK(rep2.distance == doctest::Approx(1.0));
    CHECK(!rep2.pass);

    Distribution e;
    e.exact = false;
    e.samples = 100;
    auto rep3 = compare_distributions(e, e, 0.1);
    CHECK(!rep3.note.empty());
}

TEST_CASE("check_cotermination boundary") {
    const int n = 5;
    std::set<AgentId> T = {5};
    RunResult dummy;
    // all honest terminated
    std::vector<bool> all = {false, true, true, true, true, false};
    CHECK(check_cotermination(dummy, n, T, 3, all).pass);
    // exactly 2t+1 = 3 terminated, one honest stuck: violates (t, 3)
    std::vector<bool> three = {false, true, true, true, false, false};
    CHECK(!check_cotermination(dummy, n, T, 3, three).pass);
    // fewer than k terminated is fine
    std::vector<bool> two = {false, true, true, false, false, false};
    CHECK(check_cotermination(dummy, n, T, 3, two).pass);
}

namespace {

// a protocol that sends three messages to three peers on its first turn
std::unique_ptr<AgentProtocol> burst_agent() {
    return std::make_unique<FunctionAgent>(
        [](FunctionAgent& self, const std::vector<ReceivedMsg>& msgs) {
            std::vector<TurnAction> acts;
            if (self.turn++ == 0) {
                for (int j = 1; j <= 3; ++j)
                    if (j != self.ctx().id) acts.push_back(send_to(j, "m" + std::to_string(j)));
                acts.push_back(send_to(self.ctx().id == 1 ? 2 : 1, "extra"));
            }
            for (const auto& m : msgs) {
                if (++self.turn > 100) break;
                (void)m;
            }
            if (self.turn > 3) {
                acts.push_back(output("done"));
                self.halt();
            }
            return acts;
        });
}

}  // namespace

TEST_CASE("to_single_action splits turns and preserves outputs") {
    RunFactory plain;
    plain.n = 3;
    plain.inputs = {"", "", "", ""};
    plain.make_agent = [](AgentId) { return burst_agent(); };
    plain.make_policy = [] { return std::make_unique<FairPolicy>(); };
    RunResult pr = run_once(plain, 5);

    RunFactory wrapped = plain;
    wrapped.make_agent = [](AgentId) { return to_single_action(burst_agent()); };
    wrapped.make_policy = [] {
        return std::make_unique<SingleActionSchedulerA>(std::make_unique<FairPolicy>(), 8);
    };
    RunResult wr = run_once(wrapped, 5);

    // at most one send per turn in the wrapped run
    int open_sends = 0;
    for (const Event& e : wr.history.events) {
        if (std::holds_alternative<SchEvent>(e)) open_sends = 0;
        if (std::holds_alternative<SndEvent>(e)) CHECK(++open_sends <= 1);
    }
    CHECK(outcome_key(wr, 3) == outcome_key(pr, 3));

    // fixpoint: wrapping an already-single-action protocol changes nothing
    RunFactory relay;
    relay.n = 2;
    relay.mediator = true;
    relay.inputs = {"", "0", "1"};
    relay.make_agent = [](AgentId id) -> std::unique_ptr<AgentProtocol> {
        if (id == 0) return testing::relay_mediator();
        return to_single_action(testing::relay_agent());
    };
    relay.make_policy = [] { return std::make_unique<FairPolicy>(); };
    RunResult rr = run_once(relay, 6);
    CHECK(outcome_key(rr, 2) == OutcomeKey{"0", "0"});
}

TEST_CASE("transform equivalences preserve the relay distribution exactly") {
    auto base_factory = [&](bool single, bool bcg) {
        RunFactory f;
        f.n = 2;
        f.mediator = true;
        f.inputs = {"", "0", "1"};
        f.make_agent = [=](AgentId id) -> std::unique_ptr<AgentProtocol> {
            std::unique_ptr<AgentProtocol> a =
                id == 0 ? testing::relay_mediator() : testing::relay_agent();
            if (single) a = to_single_action(std::move(a));
            if (bcg) a = to_bcg_compatible(std::move(a));
            return a;
        };
        if (single) {
            f.make_policy = [] {
                return std::make_unique<SingleActionSchedulerA>(std::make_unique<CoinFlipPolicy>(),
                                                                8);
            };
        } else if (bcg) {
            f.bcg_mode = true;
            f.make_policy = [] {
                return std::make_unique<BcgSchedulerA>(std::make_unique<CoinFlipPolicy>());
            };
        } else {
            f.make_policy = [] { return std::make_unique<CoinFlipPolicy>(); };
        }
        return f;
    };
    Distribution plain = exact_distribution(base_factory(false, false));
    Distribution single = exact_distribution(base_factory(true, false));
    Distribution bcg = exact_distribution(base_factory(false, true));
    CHECK(compare_distributions(plain, single, 1e-9).pass);
    CHECK(compare_distributions(plain, bcg, 1e-9).pass);
    REQUIRE(plain.prob.size() == 2);
    CHECK(plain.prob.at({"0", "0"}) == doctest::Approx(0.5));
}

TEST_CASE("compiled tau_f corresponds to the mediator run, per seed") {
    const int n = 5, t = 1;
    TauF tf = tau_f(n, t, 4);
    std::vector<std::string> inputs = {"", "1", "0", "2", "1", "0"};
    MediatorSpec spec = tf.mediator;

    for (uint64_t seed = 1; seed <= 3; ++seed) {
        auto sigma = [seed]() -> std::unique_ptr<SchedulerPolicy> {
            if (seed == 1) return std::make_unique<FairPolicy>(true);
            return std::make_unique<RandomPolicy>();
        };
        RunFactory med;
        med.n = n;
        med.mediator = true;
        med.inputs = inputs;
        med.make_agent = [&](AgentId id) -> std::unique_ptr<AgentProtocol> {
            if (id == kMediator) return std::make_unique<TransducerMediator>(spec);
            return tf.agents(id);
        };
        med.make_policy = sigma;
        med.fuel = 100000;
        RunResult mr = run_once(med, seed);

        CompiledProtocol proto = compile(spec, tf.agents, n, t, 97);
        SigmaPrimeOptions so;
        so.n = n;
        so.mediator = proto.opts.mediator;
        so.inner = sigma;
        RunFactory comp = compiled_run_factory(
            proto, [so] { return build_sigma_prime(so); }, inputs, 4000000);
        RunResult cr = run_once(comp, seed);
        REQUIRE(cr.status == RunStatus::Completed);
        CHECK(outcome_key(cr, n) == outcome_key(mr, n));
    }
}
