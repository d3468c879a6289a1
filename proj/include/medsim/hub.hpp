#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "medsim/circuit_fwd.hpp"
#include "medsim/engine.hpp"
#include "medsim/field.hpp"
#include "medsim/wire.hpp"

namespace medsim {

// Robust share decoding used everywhere shares are collected: accepts a
// candidate polynomial only once it agrees with `agree` of the collected
// entries, which pins the unique honest-consistent answer.
class RobustDecoder {
  public:
    RobustDecoder() = default;
    RobustDecoder(int degree, int max_errors, int agree, uint32_t p)
        : degree_(degree), max_errors_(max_errors), agree_(agree), p_(p) {}

    // Returns true when the value became available with this entry.
    bool add(int idx, Fp val);
    bool done() const { return result_.has_value(); }
    const Poly& poly() const { return *result_; }
    Fp secret() const { return result_->eval(Fp(0, p_)); }

  private:
    int degree_ = 0;
    int max_errors_ = 0;
    int agree_ = 1;
    uint32_t p_ = 0;
    ShareVector entries_;
    std::optional<Poly> result_;
};

struct Completion {
    InstanceLabel label;
    int slot = 0;                // open component; 0 for whole-instance results
    int tag = 0;                 // consensus decision
    std::vector<Fp> values;      // vss shares, cc output shares, open value
    std::vector<int> elems;      // acs core set
    std::string data;            // bcast payload
};

class Hub;

struct InstanceCtx {
    Hub* hub = nullptr;
    InstanceLabel label;
    int n = 0;
    int t = 0;
    uint32_t p = 0;
    AgentId self = 0;

    void send(AgentId to, uint8_t subkind, const std::string& body);
    void send_all(uint8_t subkind, const std::string& body);  // includes local self copy
    void complete(Completion c);
    uint32_t coin(int tag, int round) const;
    RandomSource& rng() const;
    void note(const std::string& tag, const std::string& info) const;
};

class Instance {
  public:
    virtual ~Instance() = default;
    virtual void on_message(AgentId from, uint8_t subkind, const std::string& body) = 0;
    virtual void poll() {}
    InstanceCtx ctx;
};

// Per-agent protocol host: routes labeled messages to instance machines,
// collects their emissions into engine turn actions, and exposes completed
// results to the embedding agent protocol.
class Hub {
  public:
    Hub(const AgentContext& actx, int t, uint32_t p);

    // --- application-facing starts ---
    void start_vss(const InstanceLabel& label, const std::vector<Fp>& secrets);  // dealer
    void start_broadcast(const InstanceLabel& label, const std::string& payload);
    void start_consensus(const InstanceLabel& label, int input);
    void start_acs(const InstanceLabel& label, int m1, int m2,
                   std::function<std::set<int>()> observer);
    // Public reconstruction: contribute own share of one component.
    void open_contribute(const InstanceLabel& label, int comp, Fp share, int degree, int agree);
    // Directed reconstruction: receiver prepares, senders push shares.
    void directed_open_expect(const InstanceLabel& label, int comp, int degree, int agree);
    void send_open_share(const InstanceLabel& label, AgentId to, int comp, Fp share);
    // Shared circuit evaluation; inputs are this agent's input-wire shares.
    // mask(j) must yield the same sharing family at every honest agent.
    void start_cc(const InstanceLabel& label, const Circuit* circuit, std::vector<Fp> inputs,
                  std::function<std::pair<Fp, Fp>(int)> mask_for_mul);

    // --- engine plumbing ---
    void on_turn(const std::vector<ReceivedMsg>& msgs);
    std::vector<TurnAction> drain_actions();
    std::deque<Completion>& completions() { return completions_; }

    // --- queries ---
    bool has_result(const InstanceLabel& label, int slot = 0) const {
        return results_.count({label, slot}) != 0;
    }
    const Completion& result(const InstanceLabel& label, int slot = 0) const {
        return results_.at({label, slot});
    }

    int n() const { return actx_.n; }
    int t() const { return t_; }
    uint32_t p() const { return p_; }
    AgentId self() const { return actx_.id; }

  private:
    friend struct InstanceCtx;
    Instance* get_or_create(const InstanceLabel& label, bool allow_create);
    Instance* ensure_started(const InstanceLabel& label, std::unique_ptr<Instance> inst);
    void enqueue_local(const InstanceLabel& label, uint8_t subkind, const std::string& body);
    void record(Completion c);

    AgentContext actx_;
    int t_;
    uint32_t p_;
    std::map<InstanceLabel, std::unique_ptr<Instance>> instances_;
    std::map<InstanceLabel, std::vector<std::tuple<AgentId, uint8_t, std::string>>> stash_;
    std::deque<std::tuple<InstanceLabel, AgentId, uint8_t, std::string>> queue_;
    std::vector<TurnAction> out_;
    std::deque<Completion> completions_;
    std::map<std::pair<InstanceLabel, int>, Completion> results_;
    bool processing_ = false;
    void drain_queue();
};

}  // namespace medsim
