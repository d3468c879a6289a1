#include <algorithm>
#include <deque>

#include "medsim/harness.hpp"

namespace medsim {

namespace {

using plabel::kDirectedNs;
using plabel::kMsStage;
using plabel::kMsVss;

// Runs the mediator-setting scheduler against a simulated view of the
// mediator run and drives the compiled protocol so that each of sigma_e's
// actions is realized by a block of engine actions:
//   sch(i)      -> deliver i's latest proceed_i, schedule i, read off how
//                  many sharings i initiated
//   sch(d)      -> deliver the pending proceed_d round tokens, then cycle
//                  agents and fast-deliver the round's traffic until the
//                  stage milestones (or quiescence) say the turn's history
//                  and message shares are computed
//   rec(i,d,l)  -> release the withheld share deliveries of the mediator's
//                  l-th message to i, plus one digest scheduling
//   rec(d,i,l)  -> fast-deliver the messages of i's l-th sharing until the
//                  completion milestones (or quiescence)
class SigmaPrimePolicy final : public SchedulerPolicy {
  public:
    explicit SigmaPrimePolicy(SigmaPrimeOptions opts)
        : opts_(std::move(opts)), inner_(opts_.inner()) {}

    void init(int n, bool mediator) override {
        (void)mediator;
        n_ = n;
        sim_view_.n = n;
        sim_view_.mediator = true;
        inner_->init(n, true);
        sim_halted_.assign(static_cast<std::size_t>(n) + 1, false);
        pending_halt_.assign(static_cast<std::size_t>(n) + 1, false);
        init_next_ = 1;
    }

    bool manages_fairness() const override { return true; }
    bool relaxed() const override { return inner_->relaxed(); }

    SchedAction act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                    const std::vector<bool>& halted, RandomSource& rng) override;

  private:
    enum class Mode { Init, Idle, AgentTurn, MediatorTurn, RecToAgent, RecToMediator };

    void scan(const SchedulerView& view);
    bool allowed_now(const PendingMsg& m) const;
    bool condition_met(const std::vector<bool>& halted) const;
    void post_directive(const std::vector<bool>& halted);
    void append_sim(ViewEvent e) { sim_view_.events.push_back(e); }
    void sim_send(AgentId from, AgentId to) {
        int idx = ++sim_chan_[{from, to}];
        sim_pending_.push_back(PendingMsg{from, to, idx, 0, std::nullopt});
        append_sim(ViewEvent{ViewEvent::Type::Snd, from, to, idx, std::nullopt});
    }
    void sim_recv(AgentId to, AgentId from, int idx) {
        for (auto it = sim_pending_.begin(); it != sim_pending_.end(); ++it)
            if (it->from == from && it->to == to && it->index == idx) {
                sim_pending_.erase(it);
                break;
            }
        append_sim(ViewEvent{ViewEvent::Type::Rec, to, from, idx, std::nullopt});
    }

    SigmaPrimeOptions opts_;
    std::unique_ptr<SchedulerPolicy> inner_;
    int n_ = 0;

    // trackers fed by the engine view
    std::size_t cursor_ = 0;
    std::map<int, std::vector<int>> initiations_;            // agent -> vss indices, in order
    std::map<std::pair<int, int>, std::set<int>> vss_ms_;    // (dealer, l) -> agents done
    std::map<int, int> stage_count_;                         // agent -> stage milestones seen
    std::map<int, int> stage_watermark_;                     // per-directive baseline
    std::vector<std::tuple<int, int, AgentId>> gsends_;      // (round, slot, dest), first-seen
    std::set<std::pair<int, int>> gseen_;
    bool snd_seen_ = false;

    // simulated mediator-setting state
    SchedulerView sim_view_;
    std::vector<PendingMsg> sim_pending_;
    std::map<std::pair<int, int>, int> sim_chan_;
    std::vector<bool> sim_halted_, pending_halt_;
    std::map<int, std::vector<int>> channel_vss_;            // agent -> label l per channel index
    std::map<int, std::vector<std::pair<int, int>>> med_msgs_;  // recipient -> (round, slot)

    // directive execution
    Mode mode_ = Mode::Init;
    int init_next_ = 1;
    std::deque<SchedAction> plan_;
    int dir_agent_ = 0;              // AgentTurn / RecToAgent / RecToMediator subject
    int dir_l_ = 0;                  // RecToMediator sharing index
    std::size_t init_watermark_ = 0; // AgentTurn: initiations already accounted
    std::size_t g_watermark_ = 0;    // MediatorTurn: gsends already accounted
    int rotate_ = 1;
    int turns_in_cycle_ = 0;
    int idle_cycles_ = 0;
    bool cycle_had_send_ = false;
};

void SigmaPrimePolicy::scan(const SchedulerView& view) {
    for (; cursor_ < view.events.size(); ++cursor_) {
        const ViewEvent& e = view.events[cursor_];
        if (e.type != ViewEvent::Type::Snd) continue;
        snd_seen_ = true;
        cycle_had_send_ = true;
        if (!e.label) continue;
        const ViewLabel& lb = *e.label;
        if (lb.kind == static_cast<uint8_t>(Kind::Vss) && lb.round == 0 &&
            lb.subkind == sub::VsRowCol && lb.index >= 1) {
            auto& list = initiations_[e.a];
            if (std::find(list.begin(), list.end(), static_cast<int>(lb.index)) == list.end())
                list.push_back(static_cast<int>(lb.index));
        } else if (lb.kind == static_cast<uint8_t>(Kind::Milestone)) {
            if (lb.index == kMsVss)
                vss_ms_[{lb.round / 256, lb.round % 256}].insert(e.a);
            else if (lb.index == kMsStage)
                stage_count_[e.a]++;
        } else if (lb.kind == static_cast<uint8_t>(Kind::Open) && lb.initiator == kDirectedNs) {
            auto key = std::make_pair(static_cast<int>(lb.round), static_cast<int>(lb.index));
            if (gseen_.insert(key).second)
                gsends_.emplace_back(key.first, key.second, e.b);
        }
    }
}

bool SigmaPrimePolicy::allowed_now(const PendingMsg& m) const {
    if (!m.label) return false;
    const ViewLabel& lb = *m.label;
    if (lb.kind == static_cast<uint8_t>(Kind::Milestone)) return true;
    if (lb.kind == static_cast<uint8_t>(Kind::ProceedI) ||
        lb.kind == static_cast<uint8_t>(Kind::ProceedD))
        return false;
    if (mode_ == Mode::MediatorTurn) {
        if (lb.kind == static_cast<uint8_t>(Kind::Open) && lb.initiator == kDirectedNs)
            return false;  // withheld until sigma_e delivers the message
        if (lb.kind == static_cast<uint8_t>(Kind::Vss) && lb.round == 0)
            return false;  // message sharings complete only on rec(d,i,l)
        return true;
    }
    if (mode_ == Mode::RecToMediator) {
        return lb.kind == static_cast<uint8_t>(Kind::Vss) && lb.round == 0 &&
               lb.initiator == static_cast<uint8_t>(dir_agent_) &&
               lb.index == static_cast<uint16_t>(dir_l_);
    }
    return false;
}

bool SigmaPrimePolicy::condition_met(const std::vector<bool>& halted) const {
    if (opts_.use_milestones) {
        bool all = true;
        for (int i = 1; i <= n_; ++i) {
            if (halted[static_cast<std::size_t>(i)]) continue;
            if (mode_ == Mode::MediatorTurn) {
                auto now = stage_count_.find(i);
                auto base = stage_watermark_.find(i);
                int cur = now == stage_count_.end() ? 0 : now->second;
                int from = base == stage_watermark_.end() ? 0 : base->second;
                if (cur <= from) {
                    all = false;
                    break;
                }
            } else {
                auto it = vss_ms_.find({dir_agent_, dir_l_});
                if (it == vss_ms_.end() || !it->second.count(i)) {
                    all = false;
                    break;
                }
            }
        }
        if (all) return true;
        return idle_cycles_ >= 3;  // agents that signal nothing may be malicious
    }
    return idle_cycles_ >= 2;
}

void SigmaPrimePolicy::post_directive(const std::vector<bool>& halted) {
    switch (mode_) {
        case Mode::AgentTurn: {
            append_sim(ViewEvent{ViewEvent::Type::Sch, dir_agent_, 0, 0, std::nullopt});
            auto& list = initiations_[dir_agent_];
            for (std::size_t i = init_watermark_; i < list.size(); ++i) {
                channel_vss_[dir_agent_].push_back(list[i]);
                sim_send(dir_agent_, kMediator);
            }
            append_sim(ViewEvent{ViewEvent::Type::Done, dir_agent_, 0, 0, std::nullopt});
            if (pending_halt_[static_cast<std::size_t>(dir_agent_)])
                sim_halted_[static_cast<std::size_t>(dir_agent_)] = true;
            break;
        }
        case Mode::MediatorTurn: {
            append_sim(ViewEvent{ViewEvent::Type::Sch, kMediator, 0, 0, std::nullopt});
            std::vector<std::tuple<int, int, AgentId>> batch(gsends_.begin() + static_cast<long>(g_watermark_),
                                                             gsends_.end());
            std::sort(batch.begin(), batch.end());
            for (auto& [round, slot, dest] : batch) {
                med_msgs_[dest].emplace_back(round, slot);
                sim_send(kMediator, dest);
            }
            g_watermark_ = gsends_.size();
            append_sim(ViewEvent{ViewEvent::Type::Done, kMediator, 0, 0, std::nullopt});
            break;
        }
        case Mode::RecToAgent: {
            if (pending_halt_[static_cast<std::size_t>(dir_agent_)]) break;
            sim_recv(dir_agent_, kMediator, dir_l_);
            if (halted[static_cast<std::size_t>(dir_agent_)])
                pending_halt_[static_cast<std::size_t>(dir_agent_)] = true;
            break;
        }
        case Mode::RecToMediator:
            sim_recv(kMediator, dir_agent_, dir_l_);
            break;
        default:
            break;
    }
    mode_ = Mode::Idle;
}

SchedAction SigmaPrimePolicy::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                                  const std::vector<bool>& halted, RandomSource& rng) {
    scan(view);
    for (;;) {
        if (!plan_.empty()) {
            SchedAction a = plan_.front();
            plan_.pop_front();
            return a;
        }
        switch (mode_) {
            case Mode::Init: {
                if (init_next_ <= n_) return SchedAction::schedule(init_next_++);
                mode_ = Mode::Idle;
                break;
            }
            case Mode::AgentTurn:
            case Mode::RecToAgent:
                post_directive(halted);
                break;
            case Mode::MediatorTurn:
            case Mode::RecToMediator: {
                // fast-deliver whatever this directive allows
                const PendingMsg* next = nullptr;
                for (const PendingMsg& m : pending)
                    if (allowed_now(m)) {
                        next = &m;
                        break;
                    }
                if (next) {
                    idle_cycles_ = 0;
                    return SchedAction::deliver(next->from, next->to, next->index);
                }
                if (condition_met(halted)) {
                    post_directive(halted);
                    break;
                }
                // schedule agents cyclically, counting quiet rotations
                int tries = 0;
                while (halted[static_cast<std::size_t>(rotate_)] && tries++ < n_)
                    rotate_ = rotate_ % n_ + 1;
                if (tries >= n_) {  // everyone halted; nothing more will move
                    post_directive(halted);
                    break;
                }
                int who = rotate_;
                rotate_ = rotate_ % n_ + 1;
                if (++turns_in_cycle_ >= n_) {
                    turns_in_cycle_ = 0;
                    if (!cycle_had_send_) ++idle_cycles_;
                    cycle_had_send_ = false;
                }
                return SchedAction::schedule(who);
            }
            case Mode::Idle: {
                SchedAction a = inner_->act(sim_view_, sim_pending_, sim_halted_, rng);
                if (a.kind == SchedAction::Kind::Schedule && a.who == kMediator) {
                    mode_ = Mode::MediatorTurn;
                    g_watermark_ = gsends_.size();
                    idle_cycles_ = 0;
                    turns_in_cycle_ = 0;
                    cycle_had_send_ = false;
                    stage_watermark_ = stage_count_;
                    for (int i = 1; i <= n_; ++i) {
                        const PendingMsg* oldest = nullptr;
                        for (const PendingMsg& m : pending) {
                            if (!m.label) continue;
                            if (m.label->kind != static_cast<uint8_t>(Kind::ProceedD)) continue;
                            if (m.to != i) continue;
                            if (!oldest || m.label->index < oldest->label->index) oldest = &m;
                        }
                        if (oldest)
                            plan_.push_back(
                                SchedAction::deliver(oldest->from, oldest->to, oldest->index));
                    }
                } else if (a.kind == SchedAction::Kind::Schedule) {
                    mode_ = Mode::AgentTurn;
                    dir_agent_ = a.who;
                    init_watermark_ = initiations_[a.who].size();
                    const PendingMsg* latest = nullptr;
                    for (const PendingMsg& m : pending) {
                        if (!m.label) continue;
                        if (m.label->kind != static_cast<uint8_t>(Kind::ProceedI)) continue;
                        if (m.to != a.who) continue;
                        if (!latest || m.label->index > latest->label->index) latest = &m;
                    }
                    if (latest)
                        plan_.push_back(
                            SchedAction::deliver(latest->from, latest->to, latest->index));
                    plan_.push_back(SchedAction::schedule(a.who));
                } else if (a.from == kMediator) {
                    // rec(i, d, l): release the withheld shares of that message
                    mode_ = Mode::RecToAgent;
                    dir_agent_ = a.to;
                    dir_l_ = a.index;
                    auto it = med_msgs_.find(a.to);
                    if (it == med_msgs_.end() ||
                        static_cast<int>(it->second.size()) < a.index || a.index < 1)
                        throw DesyncError("scheduler asked for an unsent mediator message");
                    auto [round, slot] = it->second[static_cast<std::size_t>(a.index - 1)];
                    bool any = false;
                    for (const PendingMsg& m : pending) {
                        if (!m.label || m.to != a.to) continue;
                        if (m.label->kind == static_cast<uint8_t>(Kind::Open) &&
                            m.label->initiator == kDirectedNs &&
                            m.label->round == static_cast<uint16_t>(round) &&
                            m.label->index == static_cast<uint16_t>(slot)) {
                            plan_.push_back(SchedAction::deliver(m.from, m.to, m.index));
                            any = true;
                        }
                    }
                    if (!any && !halted[static_cast<std::size_t>(a.to)])
                        throw DesyncError("no withheld shares for the delivered message");
                    plan_.push_back(SchedAction::schedule(a.to));  // digest
                } else {
                    // rec(d, i, l): complete i's l-th sharing everywhere
                    mode_ = Mode::RecToMediator;
                    dir_agent_ = a.from;
                    auto it = channel_vss_.find(a.from);
                    if (it == channel_vss_.end() ||
                        static_cast<int>(it->second.size()) < a.index || a.index < 1)
                        throw DesyncError("scheduler delivered an unknown sharing");
                    dir_l_ = it->second[static_cast<std::size_t>(a.index - 1)];
                    idle_cycles_ = 0;
                    turns_in_cycle_ = 0;
                    cycle_had_send_ = false;
                }
                break;
            }
        }
    }
}

}  // namespace

std::unique_ptr<SchedulerPolicy> build_sigma_prime(SigmaPrimeOptions opts) {
    return std::make_unique<SigmaPrimePolicy>(std::move(opts));
}

}  // namespace medsim
