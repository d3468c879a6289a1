#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "medsim/event.hpp"
#include "medsim/rng.hpp"

namespace medsim {

struct ReceivedMsg {
    AgentId from;
    std::string payload;
    int index;  // channel index of the delivered message
};

struct TurnAction {
    enum class Kind { Snd, Comp, Out };
    Kind kind;
    AgentId to = 0;       // Snd only
    std::string payload;  // Snd payload / Comp value / Out string
};

inline TurnAction send_to(AgentId to, std::string payload) {
    return TurnAction{TurnAction::Kind::Snd, to, std::move(payload)};
}
inline TurnAction compute(std::string value) {
    return TurnAction{TurnAction::Kind::Comp, 0, std::move(value)};
}
inline TurnAction output(std::string value) {
    return TurnAction{TurnAction::Kind::Out, 0, std::move(value)};
}

// Instrumentation sink. Single-threaded per run; tests and the harness read
// it after the run completes.
class Recorder {
  public:
    struct Entry {
        long step;
        AgentId agent;
        std::string tag;
        std::string key;
        std::string value;
    };
    void log(AgentId agent, const std::string& tag, const std::string& key,
             const std::string& value = "") {
        entries_.push_back({now_, agent, tag, key, value});
    }
    const std::vector<Entry>& entries() const { return entries_; }
    void set_now(long step) { now_ = step; }
    long now() const { return now_; }

  private:
    std::vector<Entry> entries_;
    long now_ = 0;
};

// Per-(key, round) fair coin derived from the master seed. Consensus
// machines query it per round; scheduler policies have no access, which is
// what keeps the coin ahead of the adversary in this engine.
class CoinOracle {
  public:
    explicit CoinOracle(uint64_t seed) : seed_(seed) {}
    uint32_t coin(const std::string& key, int round) const {
        return static_cast<uint32_t>(mix_seed(mix_seed(seed_, key), static_cast<uint64_t>(round)) & 1u);
    }

  private:
    uint64_t seed_;
};

struct AgentContext {
    AgentId id = 0;
    int n = 0;
    bool mediator_present = false;
    std::string input;
    RandomSource* rng = nullptr;
    const CoinOracle* coin = nullptr;
    Recorder* recorder = nullptr;
    // Derives an additional named tape for protocols that run independent
    // randomized sub-simulations (and must not disturb rng's stream).
    std::function<std::unique_ptr<RandomSource>(const std::string&)> fork_source;
};

class AgentProtocol {
  public:
    virtual ~AgentProtocol() = default;
    virtual void init(const AgentContext& ctx) { ctx_ = ctx; }
    virtual std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) = 0;
    virtual bool halted() const { return halted_; }

  protected:
    AgentContext ctx_;
    bool halted_ = false;
};

// Adapter for tiny test protocols.
class FunctionAgent final : public AgentProtocol {
  public:
    using Fn = std::function<std::vector<TurnAction>(FunctionAgent&, const std::vector<ReceivedMsg>&)>;
    explicit FunctionAgent(Fn fn) : fn_(std::move(fn)) {}
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        return fn_(*this, msgs);
    }
    const AgentContext& ctx() const { return ctx_; }
    void halt() { halted_ = true; }
    int turn = 0;

  private:
    Fn fn_;
};

struct PendingMsg {
    AgentId from;
    AgentId to;
    int index;
    long sent_step;
    std::optional<ViewLabel> label;
};

struct SchedAction {
    enum class Kind { Deliver, Schedule };
    Kind kind = Kind::Schedule;
    AgentId from = 0;  // Deliver
    AgentId to = 0;    // Deliver
    int index = 0;     // Deliver
    AgentId who = 0;   // Schedule

    static SchedAction deliver(AgentId from, AgentId to, int index) {
        return {Kind::Deliver, from, to, index, 0};
    }
    static SchedAction schedule(AgentId who) { return {Kind::Schedule, 0, 0, 0, who}; }
};

class SchedulerPolicy {
  public:
    virtual ~SchedulerPolicy() = default;
    virtual void init(int /*n*/, bool /*mediator*/) {}
    // `pending` lists undelivered messages in send order; `halted` flags by id.
    virtual SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                            const std::vector<bool>& halted, RandomSource& rng) = 0;
    virtual bool relaxed() const { return false; }
    // Orchestrating policies (the corresponding-scheduler builder, scripted
    // enumerations) own their delivery discipline; the engine's staleness
    // wrapper applies only to policies that do not.
    virtual bool manages_fairness() const { return false; }
};

struct RunSetup {
    int n = 0;
    // agents[0] is the mediator slot (may be null); agents[1..n] required.
    std::vector<std::unique_ptr<AgentProtocol>> agents;
    std::set<AgentId> malicious;  // T; mediator never in T
    SchedulerPolicy* policy = nullptr;
    std::vector<std::string> inputs;  // inputs[0] unused
    uint64_t seed = 1;
    int64_t fuel = 100000;
    bool bcg_mode = false;
    int staleness = 0;  // 0 -> default 4n
    bool labels_in_view = false;
    std::function<std::optional<ViewLabel>(const std::string&)> label_peek;
    BranchingTape* tape = nullptr;  // non-null => exact-enumeration mode
    Recorder* recorder = nullptr;
};

enum class RunStatus { Completed, FuelExhausted };

struct RunResult {
    GlobalHistory history;
    RunStatus status = RunStatus::Completed;
    long honest_messages = 0;          // Snd events by agents outside T
    long honest_network_messages = 0;  // the same, excluding self-addressed pacing tokens
};

RunResult run(RunSetup setup);

// Unary side channel: a malicious agent encodes k by sending k self-messages
// in one turn; the view exposes the count.
std::vector<TurnAction> unary_encode_to_scheduler(AgentId self, int k);
int unary_decode(const SchedulerView& view, AgentId i);

}  // namespace medsim
