#include "medsim/engine.hpp"

#include <algorithm>
#include <deque>

#include "medsim/errors.hpp"

namespace medsim {

namespace {

struct Channel {
    std::vector<std::string> payloads;  // all messages ever sent, by index-1
    std::vector<bool> delivered;
};

}  // namespace

RunResult run(RunSetup setup) {
    const int n = setup.n;
    if (n < 1) throw ConfigError("run: n must be >= 1");
    if (setup.agents.size() != static_cast<std::size_t>(n) + 1)
        throw ConfigError("run: agents vector must have n+1 slots");
    for (int i = 1; i <= n; ++i)
        if (!setup.agents[static_cast<std::size_t>(i)] && !setup.malicious.count(i))
            throw ConfigError("run: missing protocol for honest agent");
    if (!setup.policy) throw ConfigError("run: no scheduler policy");
    if (setup.fuel <= 0) throw ConfigError("run: fuel must be positive");
    const bool mediator = setup.agents[0] != nullptr;
    const bool relaxed = setup.policy->relaxed();
    const int staleness = setup.staleness > 0 ? setup.staleness : 4 * n;
    if (setup.inputs.size() < static_cast<std::size_t>(n) + 1)
        setup.inputs.resize(static_cast<std::size_t>(n) + 1);

    CoinOracle coin(mix_seed(setup.seed, "coin"));
    std::vector<std::unique_ptr<RandomSource>> sources;
    auto make_source = [&](const std::string& salt) -> RandomSource* {
        if (setup.tape) {
            sources.push_back(std::make_unique<TapeSource>(setup.tape));
        } else {
            sources.push_back(std::make_unique<SeededSource>(mix_seed(setup.seed, salt)));
        }
        return sources.back().get();
    };
    RandomSource* sched_rng = make_source("sched");

    Recorder local_recorder;
    Recorder* rec = setup.recorder ? setup.recorder : &local_recorder;

    RunResult result;
    GlobalHistory& h = result.history;
    h.inputs = setup.inputs;
    SchedulerView view;
    view.n = n;
    view.mediator = mediator;

    std::map<std::pair<AgentId, AgentId>, Channel> channels;
    std::vector<std::vector<ReceivedMsg>> inbox(static_cast<std::size_t>(n) + 1);
    std::vector<long> last_scheduled(static_cast<std::size_t>(n) + 1, 0);
    std::vector<bool> ever_scheduled(static_cast<std::size_t>(n) + 1, false);
    std::deque<PendingMsg> pending;  // in send order; lazily pruned
    long step = 0;

    auto label_of = [&](const std::string& payload) -> std::optional<ViewLabel> {
        if (!setup.labels_in_view || !setup.label_peek) return std::nullopt;
        return setup.label_peek(payload);
    };

    auto push_event = [&](Event e, std::optional<ViewLabel> label = std::nullopt) {
        ++step;
        rec->set_now(step);
        ViewEvent ve;
        if (auto* s = std::get_if<SchEvent>(&e)) {
            ve = {ViewEvent::Type::Sch, s->who, 0, 0, std::nullopt};
        } else if (auto* sn = std::get_if<SndEvent>(&e)) {
            ve = {ViewEvent::Type::Snd, sn->from, sn->to, sn->index, label};
        } else if (auto* r = std::get_if<RecEvent>(&e)) {
            ve = {ViewEvent::Type::Rec, r->to, r->from, r->index, label};
        } else if (auto* c = std::get_if<CompEvent>(&e)) {
            ve = {ViewEvent::Type::Comp, c->who, 0, 0, std::nullopt};
        } else if (auto* o = std::get_if<OutEvent>(&e)) {
            ve = {ViewEvent::Type::Out, o->who, 0, 0, std::nullopt};
        } else if (auto* d = std::get_if<DoneEvent>(&e)) {
            ve = {ViewEvent::Type::Done, d->who, 0, 0, std::nullopt};
        }
        view.events.push_back(ve);
        h.events.push_back(std::move(e));
    };

    std::vector<AgentProtocol*> proto(static_cast<std::size_t>(n) + 1, nullptr);
    for (int i = 0; i <= n; ++i) {
        auto& up = setup.agents[static_cast<std::size_t>(i)];
        if (!up) continue;
        proto[static_cast<std::size_t>(i)] = up.get();
        AgentContext ctx;
        ctx.id = i;
        ctx.n = n;
        ctx.mediator_present = mediator;
        ctx.input = i >= 1 ? setup.inputs[static_cast<std::size_t>(i)] : std::string();
        ctx.rng = make_source("agent/" + std::to_string(i));
        ctx.coin = &coin;
        ctx.recorder = rec;
        uint64_t seed = setup.seed;
        BranchingTape* tape = setup.tape;
        ctx.fork_source = [seed, tape, i](const std::string& salt) -> std::unique_ptr<RandomSource> {
            if (tape) return std::make_unique<TapeSource>(tape);
            return std::make_unique<SeededSource>(
                mix_seed(seed, salt + "/" + std::to_string(i)));
        };
        up->init(ctx);
    }

    auto halted_flags = [&]() {
        std::vector<bool> out(static_cast<std::size_t>(n) + 1, false);
        for (int i = 0; i <= n; ++i)
            out[static_cast<std::size_t>(i)] =
                proto[static_cast<std::size_t>(i)] && proto[static_cast<std::size_t>(i)]->halted();
        return out;
    };

    auto all_honest_halted = [&]() {
        for (int i = 1; i <= n; ++i) {
            if (setup.malicious.count(i)) continue;
            AgentProtocol* p = proto[static_cast<std::size_t>(i)];
            if (p && !p->halted()) return false;
        }
        return true;
    };

    auto prune_pending = [&]() {
        while (!pending.empty()) {
            const PendingMsg& m = pending.front();
            const Channel& ch = channels[{m.from, m.to}];
            if (ch.delivered[static_cast<std::size_t>(m.index - 1)]) pending.pop_front();
            else break;
        }
    };

    auto do_deliver = [&](AgentId from, AgentId to, int index) {
        auto it = channels.find({from, to});
        if (it == channels.end() || index < 1 ||
            static_cast<std::size_t>(index) > it->second.payloads.size())
            throw SchedulerViolation("deliver of nonexistent message");
        Channel& ch = it->second;
        if (ch.delivered[static_cast<std::size_t>(index - 1)])
            throw SchedulerViolation("message delivered twice");
        ch.delivered[static_cast<std::size_t>(index - 1)] = true;
        const std::string& payload = ch.payloads[static_cast<std::size_t>(index - 1)];
        inbox[static_cast<std::size_t>(to)].push_back(ReceivedMsg{from, payload, index});
        push_event(RecEvent{payload, from, to, index}, label_of(payload));
    };

    auto do_schedule = [&](AgentId who) {
        if (who < 0 || who > n || (who == 0 && !mediator))
            throw SchedulerViolation("schedule of unknown principal");
        ever_scheduled[static_cast<std::size_t>(who)] = true;
        last_scheduled[static_cast<std::size_t>(who)] = step;
        push_event(SchEvent{who});
        AgentProtocol* p = proto[static_cast<std::size_t>(who)];
        std::vector<ReceivedMsg> msgs = std::move(inbox[static_cast<std::size_t>(who)]);
        inbox[static_cast<std::size_t>(who)].clear();
        std::vector<TurnAction> actions;
        if (p && !p->halted()) actions = p->on_scheduled(msgs);
        for (TurnAction& a : actions) {
            switch (a.kind) {
                case TurnAction::Kind::Snd: {
                    if (a.to < 0 || a.to > n || (a.to == 0 && !mediator))
                        throw Error("send to unknown principal");
                    Channel& ch = channels[{who, a.to}];
                    ch.payloads.push_back(a.payload);
                    ch.delivered.push_back(false);
                    int index = static_cast<int>(ch.payloads.size());
                    auto lbl = label_of(a.payload);
                    pending.push_back(PendingMsg{who, a.to, index, step, lbl});
                    if (who >= 1 && !setup.malicious.count(who)) {
                        ++result.honest_messages;
                        if (a.to != who) ++result.honest_network_messages;
                    }
                    push_event(SndEvent{std::move(a.payload), a.to, who, index}, lbl);
                    break;
                }
                case TurnAction::Kind::Comp:
                    push_event(CompEvent{std::move(a.payload), who});
                    break;
                case TurnAction::Kind::Out:
                    push_event(OutEvent{std::move(a.payload), who});
                    break;
            }
        }
        push_event(DoneEvent{who});
        last_scheduled[static_cast<std::size_t>(who)] = step;
    };

    const bool wrap_fairness = !relaxed && !setup.policy->manages_fairness();
    setup.policy->init(n, mediator);

    for (;;) {
        if (all_honest_halted()) {
            // Drain so completed non-relaxed runs satisfy the fairness
            // invariant (every Snd matched by a Rec).
            if (!relaxed) {
                prune_pending();
                while (!pending.empty() && step < setup.fuel) {
                    PendingMsg m = pending.front();
                    do_deliver(m.from, m.to, m.index);
                    prune_pending();
                }
            }
            result.status = RunStatus::Completed;
            break;
        }
        if (step >= setup.fuel) {
            result.status = RunStatus::FuelExhausted;
            break;
        }

        prune_pending();
        std::optional<SchedAction> forced;
        if (wrap_fairness) {
            if (!pending.empty() && step - pending.front().sent_step > staleness) {
                const PendingMsg& m = pending.front();
                forced = SchedAction::deliver(m.from, m.to, m.index);
            } else {
                // Force-schedule the longest-unscheduled live principal.
                AgentId pick = -1;
                long worst = -1;
                for (int i = mediator ? 0 : 1; i <= n; ++i) {
                    AgentProtocol* p = proto[static_cast<std::size_t>(i)];
                    if (!p || p->halted()) continue;
                    if (setup.bcg_mode && ever_scheduled[static_cast<std::size_t>(i)]) continue;
                    long age = step - last_scheduled[static_cast<std::size_t>(i)];
                    if (age > staleness && age > worst) {
                        worst = age;
                        pick = i;
                    }
                }
                if (pick >= 0) forced = SchedAction::schedule(pick);
            }
        }

        SchedAction a;
        if (forced) {
            a = *forced;
        } else {
            std::vector<PendingMsg> snapshot;
            snapshot.reserve(pending.size());
            bool stale = false;
            for (const PendingMsg& m : pending) {
                if (channels[{m.from, m.to}].delivered[static_cast<std::size_t>(m.index - 1)]) {
                    stale = true;
                    continue;
                }
                snapshot.push_back(m);
            }
            if (stale) pending.assign(snapshot.begin(), snapshot.end());
            a = setup.policy->act(view, snapshot, halted_flags(), *sched_rng);
        }
        if (a.kind == SchedAction::Kind::Deliver) {
            do_deliver(a.from, a.to, a.index);
            if (setup.bcg_mode) do_schedule(a.to);
        } else {
            if (setup.bcg_mode && ever_scheduled[static_cast<std::size_t>(a.who)] && !forced)
                throw SchedulerViolation("BCG mode: repeat schedule without delivery");
            do_schedule(a.who);
        }
    }
    return result;
}

std::vector<TurnAction> unary_encode_to_scheduler(AgentId self, int k) {
    std::vector<TurnAction> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(send_to(self, ""));
    return out;
}

int unary_decode(const SchedulerView& view, AgentId i) {
    // Count Snd(i,i) events inside i's last completed turn.
    int last_done = -1, last_sch = -1;
    for (int idx = static_cast<int>(view.events.size()) - 1; idx >= 0; --idx) {
        const ViewEvent& e = view.events[static_cast<std::size_t>(idx)];
        if (last_done < 0 && e.type == ViewEvent::Type::Done && e.a == i) last_done = idx;
        else if (last_done >= 0 && e.type == ViewEvent::Type::Sch && e.a == i) {
            last_sch = idx;
            break;
        }
    }
    if (last_done < 0 || last_sch < 0) return 0;
    int count = 0;
    for (int idx = last_sch; idx < last_done; ++idx) {
        const ViewEvent& e = view.events[static_cast<std::size_t>(idx)];
        if (e.type == ViewEvent::Type::Snd && e.a == i && e.b == i) ++count;
    }
    return count;
}

}  // namespace medsim
