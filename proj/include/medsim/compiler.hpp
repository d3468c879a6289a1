#pragma once

#include <functional>
#include <deque>
#include <memory>
#include <optional>

#include "medsim/hub_agent.hpp"
#include "medsim/mpc_host.hpp"
#include "medsim/transducer.hpp"

namespace medsim {

// Instance labels of the compiled protocol. Message sharings carry round 0;
// everything belonging to the simulated mediator's turn r is tagged r.
namespace plabel {

inline constexpr uint16_t kSigmaIdx = 0x100;
inline constexpr uint16_t kMaskIdx = 0x200;
inline constexpr uint16_t kCheckBase = 0x300;   // + core member
inline constexpr uint16_t kRankBase = 0x400;    // + accepted index
inline constexpr uint16_t kProbeBase = 0x500;   // + send slot
inline constexpr uint8_t kDirectedNs = 2;       // initiator byte of g deliveries

inline InstanceLabel msg_vss(int j, int l) {
    return {Kind::Vss, static_cast<uint8_t>(j), static_cast<uint16_t>(l), 0};
}
inline InstanceLabel k1_cons(int j, int l, int r) {
    return {Kind::Cons, static_cast<uint8_t>(j), static_cast<uint16_t>(l),
            static_cast<uint16_t>(r)};
}
inline InstanceLabel k1_acs(int r) { return {Kind::Acs, 0, 1, static_cast<uint16_t>(r)}; }
inline InstanceLabel sigma_vss(int i, int r) {
    return {Kind::Vss, static_cast<uint8_t>(i), kSigmaIdx, static_cast<uint16_t>(r)};
}
inline InstanceLabel sigma_acs(int r) { return {Kind::Acs, 0, 2, static_cast<uint16_t>(r)}; }
inline InstanceLabel check_cc(int member, int r) {
    return {Kind::Cc, 0, static_cast<uint16_t>(kCheckBase + member), static_cast<uint16_t>(r)};
}
inline InstanceLabel check_open(int member, int r) {
    return {Kind::Open, 0, static_cast<uint16_t>(kCheckBase + member), static_cast<uint16_t>(r)};
}
inline InstanceLabel rank_open(int a, int r) {
    return {Kind::Open, 0, static_cast<uint16_t>(kRankBase + a), static_cast<uint16_t>(r)};
}
inline InstanceLabel k3_cc(int r) { return {Kind::Cc, 0, 1, static_cast<uint16_t>(r)}; }
inline InstanceLabel k4_cc(int r) { return {Kind::Cc, 0, 2, static_cast<uint16_t>(r)}; }
inline InstanceLabel probe_open(int slot, int r) {
    return {Kind::Open, 0, static_cast<uint16_t>(kProbeBase + slot), static_cast<uint16_t>(r)};
}
inline InstanceLabel g_open(int slot, int r) {
    return {Kind::Open, kDirectedNs, static_cast<uint16_t>(slot), static_cast<uint16_t>(r)};
}
inline InstanceLabel proceed_i(int i, int counter) {
    return {Kind::ProceedI, static_cast<uint8_t>(i), static_cast<uint16_t>(counter), 0};
}
inline InstanceLabel proceed_d(int i, int r) {
    return {Kind::ProceedD, static_cast<uint8_t>(i), static_cast<uint16_t>(r), 0};
}
// milestone types
inline constexpr uint16_t kMsVss = 1, kMsStage = 2;
inline InstanceLabel milestone_vss(int i, int j, int l) {
    return {Kind::Milestone, static_cast<uint8_t>(i), kMsVss,
            static_cast<uint16_t>(j * 256 + l)};
}
inline InstanceLabel milestone_stage(int i, int r) {
    return {Kind::Milestone, static_cast<uint8_t>(i), kMsStage, static_cast<uint16_t>(r)};
}

}  // namespace plabel

struct CompileOptions {
    int n = 0;
    int t = 0;
    uint32_t p = 97;
    MediatorSpec mediator;
    bool gated = true;     // proceed-gated (corrected) construction
    bool bounded = false;  // responsive variant: one ACS with M1=1 per later turn
    bool emit_milestones = true;
};

// One agent of the mediator-free protocol: simulates its original protocol
// against reconstructed mediator messages, shares outgoing messages by VSS,
// and advances the shared mediator history through the per-turn phases.
class CompiledAgent final : public HubAgent {
  public:
    CompiledAgent(CompileOptions opts, std::unique_ptr<AgentProtocol> inner);

    void init(const AgentContext& ctx) override;

  protected:
    void first_turn() override;
    void process() override;
    bool on_raw(AgentId from, const WireMsg& m) override;

  private:
    enum class Phase { Idle, K1, K2Sigma, K2Check, K2Rank, K3, K4, Extract };

    void advance_own_sim();
    void start_round();
    void on_message_vss_complete(const InstanceLabel& label);
    void k1_try_finish();
    void k2_start(std::vector<std::pair<int, int>> accepted);
    void k2_try_checks();
    void k2_try_ranks();
    void k2_finish(std::vector<int> order);
    void k3_start();
    void k4_start(std::vector<Fp> tilde);
    void extract_start(std::vector<Fp> next);
    void extract_try_deliver();
    void finish_round();
    void enqueue_mediator_message(int code);
    int mask_budget() const;

    CompileOptions opts_;
    std::unique_ptr<AgentProtocol> sim_;
    std::unique_ptr<RandomSource> own_rng_;
    HistoryLayout lay_;

    // own-simulation state
    int own_turns_ = 0;      // h_{i,k} index
    int vss_counter_ = 0;    // next message sharing index l
    bool proceed_i_seen_ = false;
    int proceed_i_counter_ = 1;
    std::vector<int> recon_queue_;  // mediator symbols awaiting the next advance
    bool stop_seen_ = false;

    // mediator pipeline state
    int completed_rounds_ = 0;  // kp
    int proceed_d_max_ = -1;    // highest proceed_d received
    int proceed_d_sent_ = 0;    // highest proceed_d re-sent
    Phase phase_ = Phase::Idle;
    int round_ = 0;   // active round = completed_rounds_ + 1 while running
    int blocks_ = 0;  // recorded (non-empty) mediator turns
    std::vector<Fp> h_shares_;  // my share vector of the current history
    std::vector<std::vector<int>> senders_by_turn_;

    std::set<std::pair<int, int>> accepted_ever_;
    std::map<std::pair<int, int>, int> completion_seq_;
    int next_seq_ = 0;

    // per-round working state; circuits and pools are append-only because
    // instance machines keep pointers into them across rounds
    std::vector<std::pair<int, int>> accepted_;
    std::deque<MaskPool> pools_;
    std::deque<Circuit> circuits_;
    int mask_budget_ = 0;
    int pool_used_ = 0;
    std::vector<int> sigma_core_;
    std::map<int, bool> member_valid_;
    std::map<int, std::vector<Fp>> check_results_;  // opened check outputs per member
    std::set<int> checks_opened_;
    std::map<int, const Circuit*> member_checks_;
    std::vector<std::optional<Fp>> ranks_;
    std::vector<int> theta_;
    std::vector<std::optional<uint32_t>> probe_vals_;
    std::optional<std::vector<Fp>> tilde_pending_;
    bool g_sent_ = false;
};

struct CompiledProtocol {
    CompileOptions opts;
    std::function<std::unique_ptr<AgentProtocol>(AgentId)> make;
};

// The compiler: per-agent factories for the mediator-free protocol. The
// inner factory builds the original (mediator-setting) protocol of agent i,
// which may be a malicious protocol for agents in T.
CompiledProtocol compile(const MediatorSpec& mediator,
                         std::function<std::unique_ptr<AgentProtocol>(AgentId)> inner, int n,
                         int t, uint32_t p, bool gated = true);

CompiledProtocol compile_bounded(const MediatorSpec& mediator,
                                 std::function<std::unique_ptr<AgentProtocol>(AgentId)> inner,
                                 int n, int t, uint32_t p);

}  // namespace medsim
