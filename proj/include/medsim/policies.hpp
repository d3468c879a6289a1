#pragma once

#include <optional>
#include <vector>

#include "medsim/engine.hpp"

namespace medsim {

// Deterministic prompt scheduler: delivers the oldest pending message, and
// once the backlog is clear schedules principals in rotation.
class FairPolicy : public SchedulerPolicy {
  public:
    FairPolicy() = default;
    // ignore_halted keeps the decision stream identical across paired runs
    // whose halt timing differs slightly (scheduling a halted agent is a
    // legal empty turn).
    explicit FairPolicy(bool ignore_halted) : ignore_halted_(ignore_halted) {}
    void init(int n, bool mediator) override {
        n_ = n;
        mediator_ = mediator;
        next_ = mediator ? 0 : 1;
    }
    SchedAction act(const SchedulerView&, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource&) override;

  protected:
    int n_ = 0;
    bool mediator_ = false;
    bool ignore_halted_ = false;
    int next_ = 1;
};

// Seeded random legal actions. With `starve` set, one directed channel
// (chosen from the policy tape on first use) is never delivered; the policy
// then reports itself relaxed.
class RandomPolicy : public SchedulerPolicy {
  public:
    explicit RandomPolicy(bool starve = false) : starve_(starve) {}
    void init(int n, bool mediator) override {
        n_ = n;
        mediator_ = mediator;
    }
    SchedAction act(const SchedulerView&, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;
    bool relaxed() const override { return starve_; }

  private:
    int n_ = 0;
    bool mediator_ = false;
    bool starve_ = false;
    std::optional<std::pair<AgentId, AgentId>> victim_;
};

// Withholds every message to and from one agent until nothing else is
// pending and everyone else has quiesced, then releases oldest-first.
class DelayAgentPolicy : public FairPolicy {
  public:
    explicit DelayAgentPolicy(AgentId victim) : victim_(victim) {}
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;

  private:
    AgentId victim_;
    int quiesce_ = 0;
};

// Fixed action list, then FairPolicy fallback. Used for hand-written
// schedules such as the two delivery orders of the two-agent relay example.
class ScriptedPolicy : public FairPolicy {
  public:
    explicit ScriptedPolicy(std::vector<SchedAction> script) : script_(std::move(script)) {}
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;
    // Hand-written schedules would be corrupted by forced actions; the fair
    // fallback already delivers everything eventually.
    bool manages_fairness() const override { return true; }

  private:
    std::vector<SchedAction> script_;
    std::size_t cursor_ = 0;
};

// Enumeration driver: at each decision the legal actions are listed in a
// canonical order (deliveries in send order, then schedules by id) and the
// next choice index picks one; past the end it falls back to FairPolicy.
// Enumerating all choice vectors of a given shape walks a schedule set.
class ChoiceScriptPolicy : public FairPolicy {
  public:
    explicit ChoiceScriptPolicy(std::vector<int> choices)
        : FairPolicy(true), choices_(std::move(choices)) {}
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;
    bool manages_fairness() const override { return true; }

  private:
    std::vector<int> choices_;
    std::size_t cursor_ = 0;
};

// Schedules every agent once, then flips one fair coin on which of the first
// two pending messages to deliver first, then behaves like FairPolicy.
class CoinFlipPolicy : public FairPolicy {
  public:
    void init(int n, bool mediator) override {
        FairPolicy::init(n, mediator);
        initial_ = 1;
    }
    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;

  private:
    int initial_ = 1;
    bool decided_ = false;
};

std::vector<SchedAction> legal_actions(const std::vector<PendingMsg>& pending,
                                       const std::vector<bool>& halted, int n, bool mediator);

}  // namespace medsim
