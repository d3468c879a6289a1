#include "medsim/policies.hpp"

namespace medsim {

std::vector<SchedAction> legal_actions(const std::vector<PendingMsg>& pending,
                                       const std::vector<bool>& halted, int n, bool mediator) {
    std::vector<SchedAction> out;
    for (const PendingMsg& m : pending) out.push_back(SchedAction::deliver(m.from, m.to, m.index));
    for (int i = mediator ? 0 : 1; i <= n; ++i)
        if (!halted[static_cast<std::size_t>(i)]) out.push_back(SchedAction::schedule(i));
    if (out.empty()) out.push_back(SchedAction::schedule(1));
    return out;
}

SchedAction FairPolicy::act(const SchedulerView&, const std::vector<PendingMsg>& pending,
                            const std::vector<bool>& halted, RandomSource&) {
    if (!pending.empty()) {
        const PendingMsg& m = pending.front();
        return SchedAction::deliver(m.from, m.to, m.index);
    }
    for (int tries = 0; tries <= n_; ++tries) {
        int who = next_;
        next_ = next_ + 1 > n_ ? (mediator_ ? 0 : 1) : next_ + 1;
        if (ignore_halted_ || !halted[static_cast<std::size_t>(who)])
            return SchedAction::schedule(who);
    }
    return SchedAction::schedule(1);
}

SchedAction RandomPolicy::act(const SchedulerView&, const std::vector<PendingMsg>& pending,
                              const std::vector<bool>& halted, RandomSource& rng) {
    if (starve_ && !victim_) {
        AgentId from = static_cast<AgentId>(rng.below(static_cast<uint64_t>(n_)) + 1);
        AgentId to = static_cast<AgentId>(rng.below(static_cast<uint64_t>(n_ + (mediator_ ? 1 : 0))));
        if (!mediator_) ++to;
        victim_ = std::make_pair(from, to);
    }
    std::vector<const PendingMsg*> deliverable;
    for (const PendingMsg& m : pending) {
        if (victim_ && m.from == victim_->first && m.to == victim_->second) continue;
        deliverable.push_back(&m);
    }
    bool can_deliver = !deliverable.empty();
    if (can_deliver && rng.bit()) {
        const PendingMsg* m = deliverable[rng.below(deliverable.size())];
        return SchedAction::deliver(m->from, m->to, m->index);
    }
    std::vector<AgentId> live;
    for (int i = mediator_ ? 0 : 1; i <= n_; ++i)
        if (!halted[static_cast<std::size_t>(i)]) live.push_back(i);
    if (live.empty()) {
        if (can_deliver) {
            const PendingMsg* m = deliverable.front();
            return SchedAction::deliver(m->from, m->to, m->index);
        }
        return SchedAction::schedule(1);
    }
    return SchedAction::schedule(live[rng.below(live.size())]);
}

SchedAction DelayAgentPolicy::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                                  const std::vector<bool>& halted, RandomSource& rng) {
    std::vector<PendingMsg> rest;
    bool held = false;
    for (const PendingMsg& m : pending) {
        if (m.from == victim_ || m.to == victim_) {
            held = true;
            continue;
        }
        rest.push_back(m);
    }
    if (!rest.empty()) {
        quiesce_ = 0;
        const PendingMsg& m = rest.front();
        return SchedAction::deliver(m.from, m.to, m.index);
    }
    if (held && quiesce_ > 2 * n_) {
        const PendingMsg& m = pending.front();
        quiesce_ = 0;
        return SchedAction::deliver(m.from, m.to, m.index);
    }
    ++quiesce_;
    return FairPolicy::act(view, rest, halted, rng);
}

SchedAction ScriptedPolicy::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                                const std::vector<bool>& halted, RandomSource& rng) {
    if (cursor_ < script_.size()) return script_[cursor_++];
    return FairPolicy::act(view, pending, halted, rng);
}

SchedAction ChoiceScriptPolicy::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                                    const std::vector<bool>& halted, RandomSource& rng) {
    if (cursor_ < choices_.size()) {
        std::vector<bool> nobody(halted.size(), false);
        auto actions = legal_actions(pending, nobody, n_, mediator_);
        int pick = choices_[cursor_++] % static_cast<int>(actions.size());
        return actions[static_cast<std::size_t>(pick)];
    }
    return FairPolicy::act(view, pending, halted, rng);
}

SchedAction CoinFlipPolicy::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                                const std::vector<bool>& halted, RandomSource& rng) {
    if (initial_ <= n_) return SchedAction::schedule(initial_++);
    if (!decided_ && pending.size() >= 2) {
        decided_ = true;
        const PendingMsg& m = rng.bit() ? pending[1] : pending[0];
        return SchedAction::deliver(m.from, m.to, m.index);
    }
    return FairPolicy::act(view, pending, halted, rng);
}

}  // namespace medsim
