#pragma once

// Scripted adversary catalog used across the verification suites. Scheduler
// catalog entries live in policies.hpp; these are the malicious agents.

#include <memory>

#include "medsim/engine.hpp"
#include "medsim/field.hpp"
#include "medsim/subkinds.hpp"
#include "medsim/wire.hpp"

namespace medsim {

class SilentAgent final : public AgentProtocol {
  public:
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>&) override { return {}; }
};

// Bracha INIT equivocation: mu to the lower half, mu' to the upper half.
class EquivocatingSender final : public AgentProtocol {
  public:
    EquivocatingSender(InstanceLabel label, std::string a, std::string b)
        : label_(label), a_(std::move(a)), b_(std::move(b)) {}
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>&) override {
        std::vector<TurnAction> acts;
        if (sent_) return acts;
        sent_ = true;
        for (int j = 1; j <= ctx_.n; ++j)
            acts.push_back(
                send_to(j, encode_wire(WireMsg{label_, sub::BcInit, j <= ctx_.n / 2 ? a_ : b_})));
        return acts;
    }

  private:
    InstanceLabel label_;
    std::string a_, b_;
    bool sent_ = false;
};

// Dealer that misuses the sharing phase: fully random (inconsistent) rows
// and columns, or two different consistent bivariates for the two halves.
class BadVssDealer final : public AgentProtocol {
  public:
    enum class Mode { Garbage, Equivocate };
    BadVssDealer(int t, uint32_t p, InstanceLabel label, Mode mode)
        : t_(t), p_(p), label_(label), mode_(mode) {}

    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>&) override;

  private:
    int t_;
    uint32_t p_;
    InstanceLabel label_;
    Mode mode_;
    bool sent_ = false;
};

// Decorator that runs the wrapped protocol but perturbs the share values it
// sends into circuit openings and public reconstructions: the "garbage
// sharer" entry. Error-corrected decoding is expected to absorb it.
class CorruptingAgent final : public AgentProtocol {
  public:
    explicit CorruptingAgent(std::unique_ptr<AgentProtocol> inner) : inner_(std::move(inner)) {}
    void init(const AgentContext& ctx) override {
        AgentProtocol::init(ctx);
        inner_->init(ctx);
    }
    bool halted() const override { return inner_->halted(); }
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override;

  private:
    std::unique_ptr<AgentProtocol> inner_;
};

}  // namespace medsim
