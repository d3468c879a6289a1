#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "medsim/distribution.hpp"
#include "medsim/policies.hpp"
#include "medsim/primitives.hpp"
#include "support/oracles.hpp"
#include "support/prim_drivers.hpp"

using namespace medsim;
using namespace medsim::testing;

namespace {

std::unique_ptr<SchedulerPolicy> fuzz_policy(uint64_t which) {
    switch (which % 3) {
        case 0: return std::make_unique<FairPolicy>();
        case 1: return std::make_unique<RandomPolicy>();
        default: return std::make_unique<DelayAgentPolicy>(static_cast<AgentId>(which % 5 + 1));
    }
}

std::set<std::string> honest_outputs(const RunResult& r, int n, const std::set<AgentId>& bad) {
    std::set<std::string> outs;
    auto o = outputs(r.history, n);
    for (int i = 1; i <= n; ++i)
        if (!bad.count(i) && o[static_cast<std::size_t>(i)])
            outs.insert(*o[static_cast<std::size_t>(i)]);
    return outs;
}

bool all_honest_output(const RunResult& r, int n, const std::set<AgentId>& bad) {
    auto o = outputs(r.history, n);
    for (int i = 1; i <= n; ++i)
        if (!bad.count(i) && !o[static_cast<std::size_t>(i)]) return false;
    return true;
}

}  // namespace

TEST_CASE("broadcast validity with an honest sender") {
    for (auto [n, t] : std::vector<std::pair<int, int>>{{4, 1}, {5, 1}, {7, 2}}) {
        for (uint64_t seed = 1; seed <= 20; ++seed) {
            RunFactory f;
            f.n = n;
            f.inputs.assign(static_cast<std::size_t>(n) + 1, "");
            f.inputs[1] = "5";
            f.make_agent = [tt = t](AgentId) -> std::unique_ptr<AgentProtocol> {
                return std::make_unique<BroadcastTester>(tt, 97, 1);
            };
            uint64_t s = seed;
            f.make_policy = [s] { return fuzz_policy(s); };
            RunResult r = run_once(f, seed);
            REQUIRE(r.status == RunStatus::Completed);
            CHECK(honest_outputs(r, n, {}) == std::set<std::string>{"5"});
        }
    }
}

TEST_CASE("broadcast degenerate t=0") {
    RunFactory f;
    f.n = 3;
    f.inputs = {"", "7", "", ""};
    f.make_agent = [](AgentId) -> std::unique_ptr<AgentProtocol> {
        return std::make_unique<BroadcastTester>(0, 97, 1);
    };
    f.make_policy = [] { return std::make_unique<FairPolicy>(); };
    RunResult r = run_once(f, 1);
    CHECK(honest_outputs(r, 3, {}) == std::set<std::string>{"7"});
}

TEST_CASE("broadcast agreement with an equivocating sender") {
    const int n = 4, t = 1;
    int nonempty = 0;
    for (uint64_t seed = 1; seed <= 40; ++seed) {
        RunFactory f;
        f.n = n;
        f.inputs.assign(static_cast<std::size_t>(n) + 1, "");
        f.malicious = {1};
        f.make_agent = [t = t](AgentId id) -> std::unique_ptr<AgentProtocol> {
            if (id == 1) return std::make_unique<EquivocatingSender>(bcast_label(1), "a", "b");
            return std::make_unique<BroadcastTester>(t, 97, 1);
        };
        uint64_t s = seed;
        f.make_policy = [s] { return fuzz_policy(s); };
        f.fuel = 20000;
        RunResult r = run_once(f, seed);
        auto outs = honest_outputs(r, n, {1});
        CHECK(outs.size() <= 1);  // agreement: singleton or nobody finished
        if (!outs.empty()) {
            ++nonempty;
            // whoever finished must agree on one of the two sent values
            CHECK((outs.count("a") || outs.count("b")));
        }
    }
    (void)nonempty;
}

TEST_CASE("consensus validity") {
    for (std::string bit : {"0", "1"}) {
        RunFactory f;
        f.n = 5;
        f.inputs.assign(6, bit);
        f.inputs[0] = "";
        f.make_agent = [](AgentId) -> std::unique_ptr<AgentProtocol> {
            return std::make_unique<ConsensusTester>(1, 97);
        };
        f.make_policy = [] { return std::make_unique<RandomPolicy>(); };
        for (uint64_t seed = 1; seed <= 25; ++seed) {
            RunResult r = run_once(f, seed);
            REQUIRE(r.status == RunStatus::Completed);
            CHECK(honest_outputs(r, 5, {}) == std::set<std::string>{bit});
        }
    }
}

TEST_CASE("consensus agreement and termination with mixed inputs and a byzantine agent") {
    for (auto [n, t] : std::vector<std::pair<int, int>>{{5, 1}, {7, 2}}) {
        for (uint64_t seed = 1; seed <= 40; ++seed) {
            RunFactory f;
            f.n = n;
            f.inputs.assign(static_cast<std::size_t>(n) + 1, "");
            for (int i = 1; i <= n; ++i) f.inputs[static_cast<std::size_t>(i)] = (i % 2) ? "0" : "1";
            f.malicious = {n >= 5 ? 3 : 1};
            f.make_agent = [&, t = t](AgentId id) -> std::unique_ptr<AgentProtocol> {
                if (f.malicious.count(id)) return std::make_unique<SilentAgent>();
                return std::make_unique<ConsensusTester>(t, 97);
            };
            uint64_t s = seed;
            f.make_policy = [s] { return fuzz_policy(s); };
            f.fuel = 400000;
            RunResult r = run_once(f, seed);
            REQUIRE(r.status == RunStatus::Completed);
            auto outs = honest_outputs(r, n, f.malicious);
            CHECK(outs.size() == 1);
            CHECK(all_honest_output(r, n, f.malicious));
        }
    }
}

TEST_CASE("VSS with an honest dealer: rec yields the secret, shares realizable") {
    const int n = 5, t = 1;
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        RunFactory f;
        f.n = n;
        f.inputs.assign(6, "3");
        f.inputs[0] = "";
        f.make_agent = [t = t](AgentId) -> std::unique_ptr<AgentProtocol> {
            return std::make_unique<VssTester>(t, 13, 2);
        };
        uint64_t s = seed;
        f.make_policy = [s] { return fuzz_policy(s); };
        Recorder rec;
        RunResult r = run_once(f, seed, &rec);
        REQUIRE(r.status == RunStatus::Completed);
        CHECK(honest_outputs(r, n, {}) == std::set<std::string>{"3"});

        // share realizability: the recorded Ready gate says >= n-2t agents
        // held shares whenever anyone completed
        long first_complete = -1;
        int known_before = 0;
        for (const auto& e : rec.entries()) {
            if (e.tag == "complete" && e.key.rfind("1:2:", 0) == 0 && first_complete < 0)
                first_complete = e.step;
        }
        for (const auto& e : rec.entries())
            if (e.tag == "vss_share_known" && e.step <= first_complete) ++known_before;
        CHECK(first_complete > 0);
        CHECK(known_before >= n - 2 * t);
    }
}

TEST_CASE("VSS reconstruction absorbs a wrong share") {
    const int n = 5, t = 1;
    for (uint64_t seed = 1; seed <= 15; ++seed) {
        RunFactory f;
        f.n = n;
        f.inputs.assign(6, "9");
        f.inputs[0] = "";
        f.malicious = {4};
        f.make_agent = [t = t](AgentId id) -> std::unique_ptr<AgentProtocol> {
            return std::make_unique<VssTester>(t, 13, 2, /*wrong_share=*/id == 4);
        };
        uint64_t s = seed;
        f.make_policy = [s] { return fuzz_policy(s); };
        RunResult r = run_once(f, seed);
        REQUIRE(r.status == RunStatus::Completed);
        CHECK(honest_outputs(r, n, {4}) == std::set<std::string>{"9"});
    }
}

TEST_CASE("VSS with a malicious dealer: nobody completes, or all agree") {
    const int n = 5, t = 1;
    for (auto mode : {BadVssDealer::Mode::Garbage, BadVssDealer::Mode::Equivocate}) {
        for (uint64_t seed = 1; seed <= 20; ++seed) {
            RunFactory f;
            f.n = n;
            f.inputs.assign(6, "0");
            f.inputs[0] = "";
            f.malicious = {2};
            f.make_agent = [mode, t = t](AgentId id) -> std::unique_ptr<AgentProtocol> {
                if (id == 2) return std::make_unique<BadVssDealer>(t, 13, vss_label(2), mode);
                return std::make_unique<VssTester>(t, 13, 2);
            };
            uint64_t s = seed;
            f.make_policy = [s] { return fuzz_policy(s); };
            f.fuel = 30000;
            RunResult r = run_once(f, seed);
            auto outs = honest_outputs(r, n, {2});
            // either no honest completes sharing+rec, or all output one value
            if (r.status == RunStatus::Completed) {
                CHECK(outs.size() == 1);
            } else {
                CHECK(outs.size() <= 1);
            }
        }
    }
}

TEST_CASE("ACS: common core of completed sharings") {
    const int n = 5, t = 1;
    for (uint64_t seed = 1; seed <= 30; ++seed) {
        RunFactory f;
        f.n = n;
        f.inputs.assign(6, "0");
        f.inputs[0] = "";
        f.make_agent = [t = t](AgentId) -> std::unique_ptr<AgentProtocol> {
            return std::make_unique<AcsTester>(t, 13);
        };
        uint64_t s = seed;
        f.make_policy = [s] { return fuzz_policy(s); };
        f.fuel = 300000;
        Recorder rec;
        RunResult r = run_once(f, seed, &rec);
        REQUIRE(r.status == RunStatus::Completed);
        auto outs = honest_outputs(r, n, {});
        REQUIRE(outs.size() == 1);  // all honest output the same core
        int commas = 0;
        for (char c : *outs.begin())
            if (c == ',') ++commas;
        CHECK(commas >= n - t);  // |C| >= M1

        // the completed-VSS observers are (n-t, n)-uniform
        ObserverLog log = observers_from_recorder(rec, "complete", "1:");
        std::set<AgentId> honest;
        for (int i = 1; i <= n; ++i) honest.insert(i);
        CHECK(uniformity_check(log, honest, n - t, n));
    }
}

TEST_CASE("ACS with saturated observers completes immediately") {
    const int n = 4, t = 1;
    RunFactory f;
    f.n = n;
    f.inputs.assign(5, "");
    f.make_agent = [t = t](AgentId) -> std::unique_ptr<AgentProtocol> {
        return std::make_unique<AcsTester>(t, 13, /*saturated=*/true);
    };
    f.make_policy = [] { return std::make_unique<FairPolicy>(); };
    RunResult r = run_once(f, 3);
    REQUIRE(r.status == RunStatus::Completed);
    auto outs = honest_outputs(r, n, {});
    REQUIRE(outs.size() == 1);
}

TEST_CASE("uniformity_check rejects broken observers") {
    ObserverLog log;
    log.additions[1] = {{1, 1}, {2, 2}, {3, 3}};
    log.additions[2] = {{1, 1}, {2, 2}, {3, 3}};
    std::set<AgentId> honest = {1, 2};
    CHECK(uniformity_check(log, honest, 2, 3));

    // frozen observer: agent 2 saw nothing
    ObserverLog frozen;
    frozen.additions[1] = {{1, 1}, {2, 2}};
    CHECK(!uniformity_check(frozen, honest, 2, 3));

    // escapes {1..M2}
    ObserverLog big;
    big.additions[1] = {{1, 1}, {2, 9}};
    big.additions[2] = {{1, 1}, {2, 9}};
    CHECK(!uniformity_check(big, honest, 1, 3));

    // divergent finals
    ObserverLog div;
    div.additions[1] = {{1, 1}, {2, 2}};
    div.additions[2] = {{1, 1}, {2, 3}};
    CHECK(!uniformity_check(div, honest, 1, 3));
}

TEST_CASE("VSS cotermination: if 2t+1 honest reconstruct, all honest do") {
    const int n = 5, t = 1;
    for (uint64_t seed = 1; seed <= 30; ++seed) {
        RunFactory f;
        f.n = n;
        f.inputs.assign(6, "4");
        f.inputs[0] = "";
        f.malicious = {5};
        f.make_agent = [t = t](AgentId id) -> std::unique_ptr<AgentProtocol> {
            if (id == 5) return std::make_unique<SilentAgent>();
            return std::make_unique<VssTester>(t, 13, 1);
        };
        uint64_t s = seed;
        f.make_policy = [s]() -> std::unique_ptr<SchedulerPolicy> {
            if (s % 2) return std::make_unique<RandomPolicy>(/*starve=*/true);
            return std::make_unique<RandomPolicy>();
        };
        f.fuel = 30000;
        RunResult r = run_once(f, seed);
        auto o = outputs(r.history, n);
        int done = 0;
        for (int i = 1; i <= 4; ++i)
            if (o[static_cast<std::size_t>(i)]) ++done;
        if (done >= 2 * t + 1) CHECK(done == 4);
    }
}
