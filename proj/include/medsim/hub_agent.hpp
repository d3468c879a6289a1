#pragma once

#include <memory>

#include "medsim/hub.hpp"

namespace medsim {

// Agent protocol whose behavior is built from hub-hosted sub-protocol
// instances. Subclasses drive phases in process(); raw messages the hub
// should not see (proceed tokens, milestone signals, directed g-shares) are
// offered to on_raw first.
class HubAgent : public AgentProtocol {
  public:
    HubAgent(int t, uint32_t p) : t_(t), p_(p) {}

    void init(const AgentContext& ctx) override {
        AgentProtocol::init(ctx);
        hub_ = std::make_unique<Hub>(ctx, t_, p_);
    }

    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        if (halted_) return {};
        std::vector<ReceivedMsg> for_hub;
        for_hub.reserve(msgs.size());
        for (const ReceivedMsg& m : msgs) {
            auto wm = decode_wire(m.payload);
            if (wm && on_raw(m.from, *wm)) continue;
            for_hub.push_back(m);
        }
        if (turn_ == 0) first_turn();
        hub_->on_turn(for_hub);
        process();
        ++turn_;
        auto acts = hub_->drain_actions();
        for (auto& a : extra_) acts.push_back(std::move(a));
        extra_.clear();
        return acts;
    }

  protected:
    virtual void first_turn() {}
    virtual void process() {}
    // Return true to consume the message before the hub sees it.
    virtual bool on_raw(AgentId, const WireMsg&) { return false; }

    void emit(TurnAction a) { extra_.push_back(std::move(a)); }
    void out_value(const std::string& s) { emit(output(s)); }
    Hub& hub() { return *hub_; }
    int turn_count() const { return turn_; }
    void halt() { halted_ = true; }

    int t_;
    uint32_t p_;

  private:
    std::unique_ptr<Hub> hub_;
    std::vector<TurnAction> extra_;
    int turn_ = 0;
};

}  // namespace medsim
