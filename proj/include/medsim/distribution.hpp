#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "medsim/engine.hpp"

namespace medsim {

// A run factory owns everything needed to replay a run: protocols and the
// policy are rebuilt per sample so runs are independent and deterministic.
struct RunFactory {
    int n = 0;
    bool mediator = false;
    // make(id) for id in 0..n; id 0 queried only when mediator is set.
    std::function<std::unique_ptr<AgentProtocol>(AgentId)> make_agent;
    std::function<std::unique_ptr<SchedulerPolicy>()> make_policy;
    std::set<AgentId> malicious;
    std::vector<std::string> inputs;
    int64_t fuel = 100000;
    bool bcg_mode = false;
    bool labels_in_view = false;
    std::function<std::optional<ViewLabel>(const std::string&)> label_peek;
};

RunResult run_once(const RunFactory& f, uint64_t seed, Recorder* recorder = nullptr,
                   BranchingTape* tape = nullptr);

// An output profile including the non-termination sentinel, rendered as one
// string per agent ("\x01<bot>" for none) so profiles are map keys.
using OutcomeKey = std::vector<std::string>;
OutcomeKey outcome_key(const RunResult& r, int n);
extern const std::string kNonTerminated;

struct Distribution {
    std::map<OutcomeKey, double> prob;
    bool exact = false;
    long samples = 0;  // empirical mode: sample count; exact mode: branch count
};

// Exact mode enumerates the shared fair-bit tape (every random decision in
// the run forks the prefix); branch counts beyond `max_branches` throw.
Distribution exact_distribution(const RunFactory& f, long max_branches = 1 << 14);

Distribution empirical_distribution(const RunFactory& f, long samples, uint64_t seed_base = 1,
                                    int workers = 1);

}  // namespace medsim
