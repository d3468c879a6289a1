#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "medsim/catalog.hpp"
#include "medsim/distribution.hpp"
#include "medsim/mpc_host.hpp"
#include "medsim/policies.hpp"
#include "medsim/transducer.hpp"

using namespace medsim;

namespace {

Fp fp(uint32_t v, uint32_t p = 7) { return Fp(v, p); }

Circuit add_circuit() {
    Circuit c;
    c.out(c.add(c.in(0), c.in(1)));
    return c;
}
Circuit mul_circuit() {
    Circuit c;
    c.out(c.mul(c.in(0), c.in(1)));
    return c;
}
Circuit mul_add_circuit() {
    Circuit c;
    c.out(c.add(c.mul(c.in(0), c.in(1)), c.in(2)));
    return c;
}
Circuit identity_circuit() {
    Circuit c;
    c.out(c.in(0));
    return c;
}

std::pair<std::vector<int>, std::vector<uint32_t>> parse_result(const std::string& s) {
    std::vector<int> core;
    std::vector<uint32_t> vals;
    auto bar = s.find('|');
    auto parse_list = [](const std::string& part, auto push) {
        std::string cur;
        for (char ch : part + ",") {
            if (ch == ',') {
                if (!cur.empty()) push(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
    };
    parse_list(s.substr(0, bar), [&](const std::string& x) { core.push_back(std::stoi(x)); });
    parse_list(s.substr(bar + 1), [&](const std::string& x) {
        vals.push_back(static_cast<uint32_t>(std::stoul(x)));
    });
    return {core, vals};
}

// One shared evaluation run; returns (core, opened values) after checking
// that all honest agents agree.
std::pair<std::vector<int>, std::vector<uint32_t>> eval_run(
    const Circuit* f, uint32_t p, int t, const std::vector<std::string>& inputs, uint64_t seed,
    bool wrap = false, std::function<std::unique_ptr<AgentProtocol>(AgentId)> bad = nullptr,
    std::set<AgentId> malicious = {}) {
    RunFactory fac;
    fac.n = static_cast<int>(inputs.size()) - 1;
    fac.inputs = inputs;
    fac.malicious = malicious;
    fac.make_agent = [&](AgentId id) -> std::unique_ptr<AgentProtocol> {
        if (bad && malicious.count(id)) return bad(id);
        CircuitEvalAgent::Config cfg;
        cfg.f = f;
        cfg.wrap = wrap;
        return std::make_unique<CircuitEvalAgent>(t, p, cfg);
    };
    fac.make_policy = [seed]() -> std::unique_ptr<SchedulerPolicy> {
        if (seed % 2) return std::make_unique<RandomPolicy>();
        return std::make_unique<FairPolicy>();
    };
    fac.fuel = 400000;
    RunResult r = run_once(fac, seed);
    REQUIRE(r.status == RunStatus::Completed);
    auto outs = outputs(r.history, fac.n);
    std::set<std::string> honest;
    for (int i = 1; i <= fac.n; ++i) {
        if (malicious.count(i)) continue;
        REQUIRE(outs[static_cast<std::size_t>(i)]);
        honest.insert(*outs[static_cast<std::size_t>(i)]);
    }
    REQUIRE(honest.size() == 1);
    return parse_result(*honest.begin());
}

uint32_t oracle(const Circuit& f, uint32_t p, const std::vector<std::string>& inputs,
                const std::vector<int>& core) {
    std::vector<Fp> xs;
    for (int k = 0; k < f.num_inputs(); ++k) {
        int agent = k + 1;
        bool in_core = std::find(core.begin(), core.end(), agent) != core.end();
        uint32_t v = in_core ? static_cast<uint32_t>(
                                   std::stoul(inputs[static_cast<std::size_t>(agent)]))
                             : 0;
        xs.emplace_back(v, p);
    }
    return f.eval_plain(xs)[0].v;
}

}  // namespace

TEST_CASE("eval_plain basics") {
    CHECK(add_circuit().eval_plain({fp(2), fp(3)})[0].v == 5);
    CHECK(mul_circuit().eval_plain({fp(2), fp(3)})[0].v == 6);
    CHECK(mul_add_circuit().eval_plain({fp(2), fp(3), fp(4)})[0].v == 3);

    Circuit eq;
    eq.out(eq_fermat(eq, eq.in(0), eq.in(1), 5));
    CHECK(eq.eval_plain({fp(2, 5), fp(2, 5)})[0].v == 1);
    CHECK(eq.eval_plain({fp(2, 5), fp(3, 5)})[0].v == 0);
}

TEST_CASE("circuit text round trip") {
    Circuit c = mul_add_circuit();
    std::string text = c.to_text();
    Circuit back = Circuit::from_text(text);
    CHECK(back.to_text() == text);
    CHECK(back.eval_plain({fp(2), fp(3), fp(4)})[0].v == 3);
}

TEST_CASE("delta basis indicators") {
    for (uint32_t p : {7u, 97u}) {
        Circuit c;
        int w = c.in(0);
        for (int d : delta_basis(c, w, 4, p)) c.out(d);
        for (uint32_t v = 0; v < 4; ++v) {
            auto outs = c.eval_plain({Fp(v, p)});
            for (uint32_t d = 0; d < 4; ++d)
                CHECK(outs[d].v == (d == v ? 1u : 0u));
        }
    }
}

TEST_CASE("shared evaluation matches the plain oracle") {
    struct Case {
        Circuit c;
        std::vector<std::string> inputs;
    };
    std::vector<Case> cases;
    cases.push_back({add_circuit(), {"", "2", "3", "0", "0", "0"}});
    cases.push_back({mul_circuit(), {"", "2", "3", "0", "0", "0"}});
    cases.push_back({mul_add_circuit(), {"", "2", "3", "4", "0", "0"}});
    cases.push_back({identity_circuit(), {"", "6", "0", "0", "0", "0"}});
    for (auto& cs : cases) {
        for (uint64_t seed = 1; seed <= 6; ++seed) {
            auto [core, vals] = eval_run(&cs.c, 7, 1, cs.inputs, seed);
            REQUIRE(vals.size() == 1);
            CHECK(vals[0] == oracle(cs.c, 7, cs.inputs, core));
        }
    }
}

TEST_CASE("shared evaluation over all F5 inputs, two-gate circuit") {
    Circuit c = mul_add_circuit();
    for (uint32_t a = 0; a < 5; ++a)
        for (uint32_t b = 0; b < 5; ++b) {
            std::vector<std::string> inputs = {"", std::to_string(a), std::to_string(b), "2", "0",
                                               "0"};
            auto [core, vals] = eval_run(&c, 5, 1, inputs, a * 5 + b + 1);
            CHECK(vals[0] == oracle(c, 5, inputs, core));
        }
}

TEST_CASE("shared evaluation stays exact with one catalog byzantine") {
    Circuit c = mul_add_circuit();
    std::vector<std::string> inputs = {"", "2", "3", "4", "1", "2"};
    SUBCASE("corrupting opener") {
        for (uint64_t seed = 1; seed <= 8; ++seed) {
            auto [core, vals] = eval_run(
                &c, 7, 1, inputs, seed, false,
                [&](AgentId) -> std::unique_ptr<AgentProtocol> {
                    CircuitEvalAgent::Config cfg;
                    cfg.f = &c;
                    return std::make_unique<CorruptingAgent>(
                        std::make_unique<CircuitEvalAgent>(1, 7, cfg));
                },
                {5});
            CHECK(vals[0] == oracle(c, 7, inputs, core));
        }
    }
    SUBCASE("silent agent") {
        for (uint64_t seed = 1; seed <= 8; ++seed) {
            auto [core, vals] = eval_run(
                &c, 7, 1, inputs, seed, false,
                [&](AgentId) -> std::unique_ptr<AgentProtocol> {
                    return std::make_unique<SilentAgent>();
                },
                {4});
            CHECK(vals[0] == oracle(c, 7, inputs, core));
            CHECK(std::find(core.begin(), core.end(), 4) == core.end());
        }
    }
}

TEST_CASE("randomize_output keeps the reconstructed value") {
    Circuit c = mul_add_circuit();
    std::vector<std::string> inputs = {"", "2", "3", "4", "0", "1"};
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        auto [core, vals] = eval_run(&c, 7, 1, inputs, seed, /*wrap=*/true);
        CHECK(vals[0] == oracle(c, 7, inputs, core));
    }
    // t=0 degenerate
    std::vector<std::string> small = {"", "2", "3"};
    Circuit c2 = add_circuit();
    auto [core0, vals0] = eval_run(&c2, 7, 0, small, 3, /*wrap=*/true);
    CHECK(vals0[0] == oracle(c2, 7, small, core0));
}

TEST_CASE("shared random bit: frequency and malformed-contributor exclusion") {
    auto run_bit = [&](uint64_t seed, bool with_bad) {
        RunFactory fac;
        fac.n = 5;
        fac.inputs.assign(6, "");
        if (with_bad) fac.malicious = {2};
        fac.make_agent = [with_bad](AgentId id) -> std::unique_ptr<AgentProtocol> {
            if (with_bad && id == 2)
                return std::make_unique<RandomBitAgent>(1, 5, 2u);  // shares 2: not a bit
            return std::make_unique<RandomBitAgent>(1, 5);
        };
        fac.make_policy = [seed]() -> std::unique_ptr<SchedulerPolicy> {
            if (seed % 2) return std::make_unique<RandomPolicy>();
            return std::make_unique<FairPolicy>();
        };
        fac.fuel = 600000;
        RunResult r = run_once(fac, seed);
        REQUIRE(r.status == RunStatus::Completed);
        auto outs = outputs(r.history, 5);
        std::set<std::string> honest;
        for (int i = 1; i <= 5; ++i)
            if (!fac.malicious.count(i) && outs[static_cast<std::size_t>(i)])
                honest.insert(*outs[static_cast<std::size_t>(i)]);
        REQUIRE(honest.size() == 1);
        return *honest.begin();
    };
    int ones = 0;
    const int kRuns = 60;
    for (uint64_t seed = 1; seed <= kRuns; ++seed) {
        std::string b = run_bit(seed, false);
        REQUIRE((b == "0" || b == "1"));
        if (b == "1") ++ones;
    }
    CHECK(ones >= kRuns / 4);
    CHECK(ones <= 3 * kRuns / 4);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        std::string b = run_bit(seed, true);
        CHECK((b == "0" || b == "1"));  // offender excluded, xor stays a bit
    }
}

namespace {

// Drive the step circuits over an explicit rec schedule and compare against
// the transducer oracle, turn by turn.
void check_compiled_steps(const MediatorSpec& spec, uint32_t p,
                          const std::vector<std::vector<std::pair<int, int>>>& recs) {
    HistoryLayout lay = spec.layout(p);
    std::vector<Fp> enc(static_cast<std::size_t>(lay.width()), Fp(0, p));
    std::vector<std::vector<int>> senders;
    for (int k = 1; k <= static_cast<int>(recs.size()); ++k) {
        const auto& turn = recs[static_cast<std::size_t>(k - 1)];
        REQUIRE(static_cast<int>(turn.size()) <= lay.max_recv);
        enc[static_cast<std::size_t>(lay.slot_rc(k))] = Fp(static_cast<uint32_t>(turn.size()), p);
        std::vector<int> slist;
        for (int r = 0; r < static_cast<int>(turn.size()); ++r) {
            enc[static_cast<std::size_t>(lay.slot_rec_sender(k, r))] =
                Fp(static_cast<uint32_t>(turn[static_cast<std::size_t>(r)].first), p);
            enc[static_cast<std::size_t>(lay.slot_rec_sym(k, r))] =
                Fp(static_cast<uint32_t>(turn[static_cast<std::size_t>(r)].second), p);
            slist.push_back(turn[static_cast<std::size_t>(r)].first);
        }
        senders.push_back(slist);
        Circuit step = spec.build_step(lay, k, senders, p);
        enc = step.eval_plain(enc);

        PlainHistory got = decode_history(lay, enc, k);
        std::vector<std::vector<std::pair<int, int>>> sofar(recs.begin(),
                                                            recs.begin() + k);
        PlainHistory want = transducer_run(spec, sofar);
        REQUIRE(got.turns.size() == want.turns.size());
        for (int kk = 0; kk < k; ++kk) {
            CHECK(got.turns[static_cast<std::size_t>(kk)].sends ==
                  want.turns[static_cast<std::size_t>(kk)].sends);
        }
        // the prefix property: each extension only appends
        if (k >= 2) {
            PlainHistory prev = transducer_run(
                spec, {recs.begin(), recs.begin() + (k - 1)});
            CHECK(prev.prefix_of(want));
        }
    }
}

}  // namespace

TEST_CASE("compiled transducer steps match the direct transducer") {
    const uint32_t p = 97;
    SUBCASE("echo, plain and canonical") {
        for (bool canon : {false, true}) {
            MediatorSpec spec = echo_mediator(2, canon);
            check_compiled_steps(spec, p, {{{1, 1}}});
            check_compiled_steps(spec, p, {{{2, 2}}, {{1, 1}}});
            check_compiled_steps(spec, p, {{}, {{1, 2}}});
            check_compiled_steps(spec, p, {{{1, 1}, {2, 2}}});
        }
        // exhaustive short histories for the 3-agent echo
        MediatorSpec spec3 = echo_mediator(3, true);
        for (int s1 = 1; s1 <= 3; ++s1)
            for (int sym1 = 1; sym1 <= 2; ++sym1)
                for (int s2 = 1; s2 <= 3; ++s2)
                    for (int sym2 = 1; sym2 <= 2; ++sym2) {
                        if (s1 == s2) continue;  // one message per agent
                        check_compiled_steps(spec3, p, {{{s1, sym1}}, {{s2, sym2}}});
                        check_compiled_steps(spec3, p, {{{s1, sym1}, {s2, sym2}}});
                    }
    }
    SUBCASE("stop race emits on the first turn only") {
        MediatorSpec spec = stop_race_mediator(3);
        check_compiled_steps(spec, p, {{}});
    }
    SUBCASE("repeat echo consumes N messages") {
        MediatorSpec spec = repeat_echo_mediator(2, 2);
        check_compiled_steps(spec, p, {{{1, 1}}, {{2, 2}}, {{1, 2}}});
        check_compiled_steps(spec, p, {{{1, 1}, {2, 2}, {1, 2}}});
    }
    SUBCASE("sum mediator") {
        MediatorSpec spec = sum_mediator(5, 1, 3);
        // inputs v0..v2 are codes 1..3; threshold n-t = 4
        check_compiled_steps(spec, p, {{{1, 1}}, {{2, 3}}, {{3, 2}}, {{4, 1}}});
        check_compiled_steps(spec, p, {{{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}}});
        check_compiled_steps(spec, p, {{{5, 3}, {4, 3}}, {{2, 2}, {1, 1}}});
        check_compiled_steps(spec, p, {{}, {{5, 3}, {4, 3}, {2, 2}, {1, 1}}});
    }
}

TEST_CASE("mediator message extraction reads static slots") {
    const uint32_t p = 97;
    MediatorSpec spec = echo_mediator(2, false);
    HistoryLayout lay = spec.layout(p);

    // empty history: every extraction slot holds 0
    std::vector<Fp> zero(static_cast<std::size_t>(lay.width()), Fp(0, p));
    CHECK(zero[static_cast<std::size_t>(lay.slot_snd_rcpt(1, 0))].v == 0);

    // one received message: recipients 1,2 then none
    zero[static_cast<std::size_t>(lay.slot_rc(1))] = Fp(1, p);
    zero[static_cast<std::size_t>(lay.slot_rec_sender(1, 0))] = Fp(1, p);
    zero[static_cast<std::size_t>(lay.slot_rec_sym(1, 0))] = Fp(1, p);  // "0"
    Circuit step = spec.build_step(lay, 1, {{1}}, p);
    auto enc = step.eval_plain(zero);
    CHECK(enc[static_cast<std::size_t>(lay.slot_snd_rcpt(1, 0))].v == 1);  // f_{1,1}
    CHECK(enc[static_cast<std::size_t>(lay.slot_snd_rcpt(1, 1))].v == 2);  // f_{1,2}
    CHECK(enc[static_cast<std::size_t>(lay.slot_snd_rcpt(1, 2))].v == 0);  // f_{1,3}
    CHECK(enc[static_cast<std::size_t>(lay.slot_snd_sym(1, 0))].v == 1);   // g_{1,1} echoes
    CHECK(enc[static_cast<std::size_t>(lay.slot_snd_sym(1, 1))].v == 1);
}
