#include "medsim/distribution.hpp"

#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include "medsim/errors.hpp"

namespace medsim {

const std::string kNonTerminated = "\x01<bot>";

RunResult run_once(const RunFactory& f, uint64_t seed, Recorder* recorder, BranchingTape* tape) {
    RunSetup s;
    s.n = f.n;
    s.agents.resize(static_cast<std::size_t>(f.n) + 1);
    for (int i = f.mediator ? 0 : 1; i <= f.n; ++i)
        s.agents[static_cast<std::size_t>(i)] = f.make_agent(i);
    auto policy = f.make_policy();
    s.policy = policy.get();
    s.malicious = f.malicious;
    s.inputs = f.inputs;
    s.seed = seed;
    s.fuel = f.fuel;
    s.bcg_mode = f.bcg_mode;
    s.labels_in_view = f.labels_in_view;
    s.label_peek = f.label_peek;
    s.tape = tape;
    s.recorder = recorder;
    return run(std::move(s));
}

OutcomeKey outcome_key(const RunResult& r, int n) {
    auto outs = outputs(r.history, n);
    OutcomeKey key;
    key.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const auto& o = outs[static_cast<std::size_t>(i)];
        key.push_back(o ? *o : kNonTerminated);
    }
    return key;
}

Distribution exact_distribution(const RunFactory& f, long max_branches) {
    Distribution dist;
    dist.exact = true;
    std::deque<std::vector<uint8_t>> frontier;
    frontier.push_back({});
    long branches = 0;
    while (!frontier.empty()) {
        if (++branches > max_branches) throw Error("exact enumeration exceeds branch bound");
        std::vector<uint8_t> prefix = std::move(frontier.front());
        frontier.pop_front();
        BranchingTape tape(prefix);
        try {
            RunResult r = run_once(f, /*seed=*/1, nullptr, &tape);
            dist.prob[outcome_key(r, f.n)] += std::ldexp(1.0, -static_cast<int>(tape.used()));
        } catch (const TapeExhausted&) {
            for (uint8_t b : {0, 1}) {
                std::vector<uint8_t> next = prefix;
                next.push_back(b);
                frontier.push_back(std::move(next));
            }
        }
    }
    dist.samples = branches;
    return dist;
}

Distribution empirical_distribution(const RunFactory& f, long samples, uint64_t seed_base,
                                    int workers) {
    Distribution dist;
    dist.exact = false;
    dist.samples = samples;
    if (workers <= 1) {
        for (long i = 0; i < samples; ++i) {
            RunResult r = run_once(f, seed_base + static_cast<uint64_t>(i));
            dist.prob[outcome_key(r, f.n)] += 1.0;
        }
    } else {
        std::vector<std::map<OutcomeKey, double>> partial(static_cast<std::size_t>(workers));
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                for (long i = w; i < samples; i += workers) {
                    RunResult r = run_once(f, seed_base + static_cast<uint64_t>(i));
                    partial[static_cast<std::size_t>(w)][outcome_key(r, f.n)] += 1.0;
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& m : partial)
            for (auto& [k, v] : m) dist.prob[k] += v;
    }
    for (auto& [k, v] : dist.prob) v /= static_cast<double>(samples);
    return dist;
}

}  // namespace medsim
