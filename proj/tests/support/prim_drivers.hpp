#pragma once

// Driver protocols for exercising the sub-protocol toolbox through the
// engine, plus misbehaving variants used across the fuzz suites.

#include <set>

#include "medsim/catalog.hpp"
#include "medsim/hub_agent.hpp"
#include "medsim/subkinds.hpp"

namespace medsim::testing {

inline InstanceLabel bcast_label(int sender) { return {Kind::Bcast, static_cast<uint8_t>(sender), 1, 0}; }
inline InstanceLabel cons_label() { return {Kind::Cons, 0, 1, 0}; }
inline InstanceLabel vss_label(int dealer, int idx = 1) {
    return {Kind::Vss, static_cast<uint8_t>(dealer), static_cast<uint16_t>(idx), 0};
}
inline InstanceLabel rec_label(int dealer, int idx = 1) {
    return {Kind::Open, static_cast<uint8_t>(dealer), static_cast<uint16_t>(idx), 0};
}
inline InstanceLabel acs_label() { return {Kind::Acs, 0, 1, 0}; }

// Broadcast: the configured sender broadcasts its input; everyone outputs
// the delivered payload.
class BroadcastTester : public HubAgent {
  public:
    BroadcastTester(int t, uint32_t p, int sender) : HubAgent(t, p), sender_(sender) {}

  protected:
    void first_turn() override {
        if (ctx_.id == sender_) hub().start_broadcast(bcast_label(sender_), ctx_.input);
    }
    void process() override {
        auto& q = hub().completions();
        while (!q.empty()) {
            Completion c = std::move(q.front());
            q.pop_front();
            if (c.label.kind == Kind::Bcast) {
                out_value(c.data);
                halt();
            }
        }
    }

  private:
    int sender_;
};

// Consensus: every agent inputs its own bit and outputs the decision.
class ConsensusTester : public HubAgent {
  public:
    using HubAgent::HubAgent;

  protected:
    void first_turn() override {
        hub().start_consensus(cons_label(), ctx_.input == "1" ? 1 : 0);
    }
    void process() override {
        auto& q = hub().completions();
        while (!q.empty()) {
            Completion c = std::move(q.front());
            q.pop_front();
            if (c.label.kind == Kind::Cons) {
                out_value(std::to_string(c.tag));
                halt();
            }
        }
    }
};

// VSS share + public reconstruction: the dealer shares its input; everyone
// outputs the reconstructed value. With wrong_share set, the agent corrupts
// its contribution to the reconstruction (error-correction fodder).
class VssTester : public HubAgent {
  public:
    VssTester(int t, uint32_t p, int dealer, bool wrong_share = false)
        : HubAgent(t, p), dealer_(dealer), wrong_share_(wrong_share) {}

  protected:
    void first_turn() override {
        if (ctx_.id == dealer_)
            hub().start_vss(vss_label(dealer_),
                            {Fp(static_cast<uint32_t>(std::stoul(ctx_.input)), p_)});
    }
    void process() override {
        auto& q = hub().completions();
        while (!q.empty()) {
            Completion c = std::move(q.front());
            q.pop_front();
            if (c.label.kind == Kind::Vss) {
                Fp share = c.values.at(0);
                if (wrong_share_) share = share + Fp(1, p_);
                hub().open_contribute(rec_label(dealer_), 0, share, t_, 2 * t_ + 1);
            } else if (c.label.kind == Kind::Open) {
                out_value(std::to_string(c.values.at(0).v));
                halt();
            }
        }
    }

  private:
    int dealer_;
    bool wrong_share_;
};

// Concurrent sharings + ACS over completed-VSS observers; outputs the core.
class AcsTester : public HubAgent {
  public:
    AcsTester(int t, uint32_t p, bool saturated = false)
        : HubAgent(t, p), saturated_(saturated) {}

  protected:
    void first_turn() override {
        if (!saturated_)
            hub().start_vss(vss_label(ctx_.id),
                            {Fp(static_cast<uint32_t>(ctx_.id), p_)});
        Hub* h = &hub();
        int n = ctx_.n;
        bool sat = saturated_;
        hub().start_acs(acs_label(), n - t_, n, [h, n, sat] {
            std::set<int> u;
            for (int j = 1; j <= n; ++j)
                if (sat || h->has_result(vss_label(j))) u.insert(j);
            return u;
        });
    }
    void process() override {
        auto& q = hub().completions();
        while (!q.empty()) {
            Completion c = std::move(q.front());
            q.pop_front();
            if (c.label.kind == Kind::Acs) {
                std::string s;
                for (int e : c.elems) s += std::to_string(e) + ",";
                out_value(s);
                halt();
            }
        }
    }

  private:
    bool saturated_;
};

}  // namespace medsim::testing
