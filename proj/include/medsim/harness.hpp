#pragma once

#include <functional>
#include <map>
#include <optional>

#include "medsim/catalog.hpp"
#include "medsim/compiler.hpp"
#include "medsim/distribution.hpp"
#include "medsim/mpc_host.hpp"
#include "medsim/policies.hpp"
#include "medsim/transducer.hpp"

namespace medsim {

// --------------------------------------------------------------------------
// Reference protocols in the mediator setting. All clients speak symbol
// strings from the mediator's alphabet, so the same objects can be simulated
// by the compiled protocol.

// Sends its input symbol once, outputs the first non-STOP reply.
std::unique_ptr<AgentProtocol> echo_client(const MediatorSpec& spec);
// Outputs 1 if STOP arrived before its first scheduling, else 0.
std::unique_ptr<AgentProtocol> stop_race_client(const MediatorSpec& spec);
// Sends "v<x>", outputs "<C>|<y>" when both reply parts arrived.
std::unique_ptr<AgentProtocol> sum_client(const MediatorSpec& spec);
// Like sum_client but pretends its input is subst(x): the input-substituting
// catalog entry.
std::unique_ptr<AgentProtocol> lying_sum_client(const MediatorSpec& spec,
                                                std::function<int(int)> subst);
// Sends a fixed valid symbol regardless of input: the garbage-input entry.
std::unique_ptr<AgentProtocol> fixed_symbol_client(const MediatorSpec& spec, std::string sym);

// --------------------------------------------------------------------------
// Secure function computation references (the ideal side).

// f with the inputs outside C replaced by zero.
Fp f_C_eval(const Circuit& f, const std::vector<int>& C, const std::vector<Fp>& x);

struct IdealAdversary {
    std::set<int> T;
    // r is drawn by the caller; the three maps share it.
    std::function<std::vector<int>(const std::vector<Fp>& xT, uint64_t r)> choose_core;
    std::function<std::vector<Fp>(const std::vector<Fp>& xT, uint64_t r)> substitute;
    std::function<std::string(int i, const std::vector<Fp>& xT, Fp fc, uint64_t r)> output;
};

// The ideal output profile rho(x, A, r; f): honest agents i get (C, f_C(y)),
// members of T get O_i(x_T, f_C(y), r).
std::vector<std::string> ideal_output(const IdealAdversary& a, const Circuit& f,
                                      const std::vector<Fp>& x, uint64_t r);

// Canonical rendering shared by the ideal evaluator and the protocol agents.
std::string render_core_value(const std::vector<int>& core, Fp value);

// pi^f: the five-step secure computation of f (VSS inputs, ACS core, shared
// circuit on core-restricted inputs, reconstruction, output (C, f_C(x))).
std::function<std::unique_ptr<AgentProtocol>(AgentId)> pi_f_agents(const Circuit* f, int n, int t,
                                                                   uint32_t p);

// tau^f + tau^f_d: inputs go to the mediator, which waits for a valid input
// set of size >= n-t and answers (C, f_C(x)). Built on the sum mediator.
struct TauF {
    MediatorSpec mediator;
    std::function<std::unique_ptr<AgentProtocol>(AgentId)> agents;
};
TauF tau_f(int n, int t, int max_input);

// --------------------------------------------------------------------------
// Distribution comparison. Distance is d(nu, nu') = sum_s |nu(s) - nu'(s)|.

struct DistributionReport {
    double distance = 0;
    bool exact = false;
    long samples_a = 0, samples_b = 0;
    bool pass = false;
    double tolerance = 0;
    std::string note;
};

DistributionReport compare_distributions(const Distribution& a, const Distribution& b,
                                         double tolerance);

// --------------------------------------------------------------------------
// Cotermination checking.

struct CotermVerdict {
    bool pass = true;
    int terminated = 0;
    int honest = 0;
};

// Per-run predicate: either every agent outside T terminated, or strictly
// fewer than k did. "Terminated" means the engine saw the agent halt.
CotermVerdict check_cotermination(const RunResult& r, int n, const std::set<AgentId>& T,
                                  int k_threshold, const std::vector<bool>& halted);

// --------------------------------------------------------------------------
// Model transforms.

// H:送 at most one message per turn, buffering the rest (queue U_i plus a
// next flag per the equivalence construction).
std::unique_ptr<AgentProtocol> to_single_action(std::unique_ptr<AgentProtocol> inner);
// Companion scheduler mapping (a): repeat-schedule until the agent finishes
// a turn without sending.
class SingleActionSchedulerA : public SchedulerPolicy {
  public:
    SingleActionSchedulerA(std::unique_ptr<SchedulerPolicy> inner, int bound_n);
    void init(int n, bool mediator) override;
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;
    bool manages_fairness() const override { return true; }

  private:
    std::unique_ptr<SchedulerPolicy> inner_;
    int bound_;
    std::optional<AgentId> repeating_;
    int repeats_ = 0;
    bool sent_in_turn_ = false;
    std::size_t cursor_ = 0;
    SchedulerView sim_view_;
    std::vector<PendingMsg> sim_pending_;
    std::vector<ViewEvent> burst_snds_;
    std::map<std::pair<int, int>, int> sim_chan_;
};

// Companion mapping for BCG schedulers: simulates the inner scheduler and
// realizes sch(i) as "deliver i's latest self token". Assumes the wrapped
// protocols do not send to themselves apart from the wrapper tokens.
class BcgSchedulerA : public SchedulerPolicy {
  public:
    explicit BcgSchedulerA(std::unique_ptr<SchedulerPolicy> inner) : inner_(std::move(inner)) {}
    void init(int n, bool mediator) override;
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;
    bool manages_fairness() const override { return true; }

  private:
    std::unique_ptr<SchedulerPolicy> inner_;
    int n_ = 0;
    bool mediator_ = false;
    int init_next_ = 0;
    std::size_t cursor_ = 0;
    std::optional<AgentId> awaiting_turn_;
    SchedulerView sim_view_;
    std::vector<PendingMsg> sim_pending_;
    std::vector<ViewEvent> burst_snds_;
    std::map<std::pair<int, int>, int> sim_chan_;
};

// proceed_i wrapper for BCG schedulers: acts only when its own token comes
// back, so delivery events alone drive the protocol.
std::unique_ptr<AgentProtocol> to_bcg_compatible(std::unique_ptr<AgentProtocol> inner);

// --------------------------------------------------------------------------
// The part-(a) corresponding scheduler: runs sigma_e against a simulated
// mediator-setting view and drives the compiled protocol so that every run
// corresponds to the mediator run event-for-event.

struct SigmaPrimeOptions {
    int n = 0;
    MediatorSpec mediator;
    bool use_milestones = true;  // otherwise the quiescence heuristic
    std::function<std::unique_ptr<SchedulerPolicy>()> inner;
};

std::unique_ptr<SchedulerPolicy> build_sigma_prime(SigmaPrimeOptions opts);

// Compiled runs need labels on the scheduler view; this bundles the flags.
RunFactory compiled_run_factory(const CompiledProtocol& proto,
                                std::function<std::unique_ptr<SchedulerPolicy>()> policy,
                                std::vector<std::string> inputs, int64_t fuel = 2000000);

}  // namespace medsim
