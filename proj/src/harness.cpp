#include "medsim/harness.hpp"

#include <algorithm>
#include <cmath>

namespace medsim {

namespace {

// Shared chassis for mediator-setting clients: tags outgoing messages,
// splits replies from STOP, halts after processing a STOP.
class ClientAgent : public AgentProtocol {
  public:
    explicit ClientAgent(MediatorSpec spec) : spec_(std::move(spec)) {}

    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        std::vector<TurnAction> acts;
        bool stop = false;
        std::vector<std::string> replies;
        for (const ReceivedMsg& m : msgs) {
            if (m.from != kMediator) continue;
            if (spec_.is_stop(spec_.sym_code(m.payload))) {
                stop = true;
                break;  // nothing after a STOP is processed
            }
            replies.push_back(m.payload);
        }
        turn(replies, acts);
        if (stop) halted_ = true;
        return acts;
    }

  protected:
    virtual void turn(const std::vector<std::string>& replies, std::vector<TurnAction>& acts) = 0;

    void send_tagged(const std::string& sym, std::vector<TurnAction>& acts) {
        acts.push_back(send_to(kMediator, tag_message(++sent_, sym)));
    }

    MediatorSpec spec_;
    int sent_ = 0;
    int turns_ = 0;
};

class EchoClient final : public ClientAgent {
  public:
    using ClientAgent::ClientAgent;

  protected:
    void turn(const std::vector<std::string>& replies, std::vector<TurnAction>& acts) override {
        if (turns_++ == 0) {
            std::string sym = spec_.sym_code(ctx_.input) != 0 ? ctx_.input : spec_.alphabet.at(1);
            send_tagged(sym, acts);
        }
        for (const std::string& r : replies) acts.push_back(output(r));
    }
};

class StopRaceClient final : public ClientAgent {
  public:
    using ClientAgent::ClientAgent;
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        // outputs 1 iff STOP was received before its first scheduling
        std::vector<TurnAction> acts;
        bool stop = false;
        for (const ReceivedMsg& m : msgs)
            if (m.from == kMediator && spec_.is_stop(spec_.sym_code(m.payload))) stop = true;
        if (turns_++ == 0) acts.push_back(output(stop ? "1" : "0"));
        if (stop) halted_ = true;
        return acts;
    }

  protected:
    void turn(const std::vector<std::string>&, std::vector<TurnAction>&) override {}
};

class SumClient : public ClientAgent {
  public:
    SumClient(MediatorSpec spec, std::function<int(int)> subst)
        : ClientAgent(std::move(spec)), subst_(std::move(subst)) {}

  protected:
    void turn(const std::vector<std::string>& replies, std::vector<TurnAction>& acts) override {
        if (turns_++ == 0) {
            int x = 0;
            try {
                x = std::stoi(ctx_.input);
            } catch (...) {
            }
            if (subst_) x = subst_(x);
            send_tagged("v" + std::to_string(x), acts);
        }
        for (const std::string& r : replies) {
            if (!r.empty() && r[0] == 'C') c_part_ = r;
            if (!r.empty() && r[0] == 'y') y_part_ = r;
        }
        if (c_part_ && y_part_ && !reported_) {
            reported_ = true;
            acts.push_back(output(*c_part_ + "|" + *y_part_));
        }
    }

  private:
    std::function<int(int)> subst_;
    std::optional<std::string> c_part_, y_part_;
    bool reported_ = false;
};

class FixedSymbolClient final : public ClientAgent {
  public:
    FixedSymbolClient(MediatorSpec spec, std::string sym)
        : ClientAgent(std::move(spec)), sym_(std::move(sym)) {}

  protected:
    void turn(const std::vector<std::string>&, std::vector<TurnAction>& acts) override {
        if (turns_++ == 0) send_tagged(sym_, acts);
    }

  private:
    std::string sym_;
};

}  // namespace

std::unique_ptr<AgentProtocol> echo_client(const MediatorSpec& spec) {
    return std::make_unique<EchoClient>(spec);
}
std::unique_ptr<AgentProtocol> stop_race_client(const MediatorSpec& spec) {
    return std::make_unique<StopRaceClient>(spec);
}
std::unique_ptr<AgentProtocol> sum_client(const MediatorSpec& spec) {
    return std::make_unique<SumClient>(spec, nullptr);
}
std::unique_ptr<AgentProtocol> lying_sum_client(const MediatorSpec& spec,
                                                std::function<int(int)> subst) {
    return std::make_unique<SumClient>(spec, std::move(subst));
}
std::unique_ptr<AgentProtocol> fixed_symbol_client(const MediatorSpec& spec, std::string sym) {
    return std::make_unique<FixedSymbolClient>(spec, std::move(sym));
}

// --------------------------------------------------------------------------

Fp f_C_eval(const Circuit& f, const std::vector<int>& C, const std::vector<Fp>& x) {
    std::vector<Fp> masked = x;
    for (std::size_t i = 0; i < masked.size(); ++i) {
        int agent = static_cast<int>(i) + 1;
        if (std::find(C.begin(), C.end(), agent) == C.end()) masked[i] = Fp(0, masked[i].p);
    }
    return f.eval_plain(masked).at(0);
}

std::string render_core_value(const std::vector<int>& core, Fp value) {
    std::string s;
    for (std::size_t i = 0; i < core.size(); ++i) s += (i ? "," : "") + std::to_string(core[i]);
    return s + "|" + std::to_string(value.v);
}

std::vector<std::string> ideal_output(const IdealAdversary& a, const Circuit& f,
                                      const std::vector<Fp>& x, uint64_t r) {
    std::vector<Fp> xT;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (a.T.count(static_cast<int>(i) + 1)) xT.push_back(x[i]);
    std::vector<int> C = a.choose_core ? a.choose_core(xT, r) : std::vector<int>{};
    if (!a.choose_core) {
        for (std::size_t i = 0; i < x.size(); ++i) C.push_back(static_cast<int>(i) + 1);
    }
    std::vector<Fp> y = x;
    if (a.substitute) {
        std::vector<Fp> sub = a.substitute(xT, r);
        std::size_t k = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (a.T.count(static_cast<int>(i) + 1)) y[i] = sub.at(k++);
    }
    Fp fc = f_C_eval(f, C, y);
    std::vector<std::string> rho;
    std::size_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        int agent = static_cast<int>(i) + 1;
        if (a.T.count(agent)) {
            std::vector<Fp> xt = xT;
            rho.push_back(a.output ? a.output(agent, xt, fc, r) : render_core_value(C, fc));
            ++k;
        } else {
            rho.push_back(render_core_value(C, fc));
        }
    }
    return rho;
}

std::function<std::unique_ptr<AgentProtocol>(AgentId)> pi_f_agents(const Circuit* f, int n, int t,
                                                                   uint32_t p) {
    (void)n;
    return [f, t, p](AgentId) -> std::unique_ptr<AgentProtocol> {
        CircuitEvalAgent::Config cfg;
        cfg.f = f;
        cfg.format = [](const std::vector<Fp>& vals, const std::vector<int>& core) {
            return render_core_value(core, vals.at(0));
        };
        cfg.input_value = [p](const AgentContext& ctx, RandomSource&) {
            uint32_t v = 0;
            try {
                v = static_cast<uint32_t>(std::stoul(ctx.input));
            } catch (...) {
            }
            return Fp(v, p);
        };
        return std::make_unique<CircuitEvalAgent>(t, p, cfg);
    };
}

TauF tau_f(int n, int t, int max_input) {
    TauF out;
    out.mediator = sum_mediator(n, t, max_input);
    MediatorSpec spec = out.mediator;
    out.agents = [spec](AgentId) { return sum_client(spec); };
    return out;
}

// --------------------------------------------------------------------------

DistributionReport compare_distributions(const Distribution& a, const Distribution& b,
                                         double tolerance) {
    DistributionReport rep;
    rep.tolerance = tolerance;
    rep.exact = a.exact && b.exact;
    rep.samples_a = a.samples;
    rep.samples_b = b.samples;
    std::set<OutcomeKey> keys;
    for (auto& [k, v] : a.prob) keys.insert(k);
    for (auto& [k, v] : b.prob) keys.insert(k);
    double d = 0;
    for (const auto& k : keys) {
        double pa = a.prob.count(k) ? a.prob.at(k) : 0.0;
        double pb = b.prob.count(k) ? b.prob.at(k) : 0.0;
        d += std::abs(pa - pb);
    }
    rep.distance = d;
    rep.pass = d <= tolerance;
    if (!rep.exact)
        rep.note = "empirical comparison at " + std::to_string(a.samples) + "/" +
                   std::to_string(b.samples) + " samples; sampling error not subtracted";
    return rep;
}

CotermVerdict check_cotermination(const RunResult& r, int n, const std::set<AgentId>& T,
                                  int k_threshold, const std::vector<bool>& halted) {
    (void)r;
    CotermVerdict v;
    for (int i = 1; i <= n; ++i) {
        if (T.count(i)) continue;
        ++v.honest;
        if (halted[static_cast<std::size_t>(i)]) ++v.terminated;
    }
    v.pass = v.terminated == v.honest || v.terminated < k_threshold;
    return v;
}

// --------------------------------------------------------------------------
// Single-action transform.

namespace {

class SingleActionAgent final : public AgentProtocol {
  public:
    explicit SingleActionAgent(std::unique_ptr<AgentProtocol> inner) : inner_(std::move(inner)) {}
    void init(const AgentContext& ctx) override {
        AgentProtocol::init(ctx);
        inner_->init(ctx);
    }
    bool halted() const override { return inner_->halted() && queue_.empty(); }

    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        std::vector<TurnAction> out;
        buffered_.insert(buffered_.end(), msgs.begin(), msgs.end());
        if (next_) {
            std::vector<ReceivedMsg> take = std::move(buffered_);
            buffered_.clear();
            auto acts = inner_->on_scheduled(take);
            for (auto& a : acts) {
                if (a.kind == TurnAction::Kind::Snd) queue_.push_back(std::move(a));
                else out.push_back(std::move(a));  // outputs happen immediately
            }
            if (queue_.empty()) return out;  // done(i) with no sends
            next_ = false;
        }
        out.push_back(std::move(queue_.front()));
        queue_.erase(queue_.begin());
        if (queue_.empty()) next_ = true;
        return out;
    }

  private:
    std::unique_ptr<AgentProtocol> inner_;
    std::vector<TurnAction> queue_;
    std::vector<ReceivedMsg> buffered_;
    bool next_ = true;
};

}  // namespace

std::unique_ptr<AgentProtocol> to_single_action(std::unique_ptr<AgentProtocol> inner) {
    return std::make_unique<SingleActionAgent>(std::move(inner));
}

SingleActionSchedulerA::SingleActionSchedulerA(std::unique_ptr<SchedulerPolicy> inner, int bound_n)
    : inner_(std::move(inner)), bound_(bound_n) {}

void SingleActionSchedulerA::init(int n, bool mediator) {
    inner_->init(n, mediator);
    sim_view_.n = n;
    sim_view_.mediator = mediator;
}

SchedAction SingleActionSchedulerA::act(const SchedulerView& view,
                                        const std::vector<PendingMsg>& pending,
                                        const std::vector<bool>& halted, RandomSource& rng) {
    (void)pending;
    // track the real view; a repeat-burst folds into one simulated atomic turn
    while (cursor_ < view.events.size()) {
        const ViewEvent& e = view.events[cursor_++];
        if (e.type == ViewEvent::Type::Snd) {
            int idx = ++sim_chan_[{e.a, e.b}];
            burst_snds_.push_back(ViewEvent{ViewEvent::Type::Snd, e.a, e.b, idx, std::nullopt});
            if (repeating_ && *repeating_ == e.a) sent_in_turn_ = true;
        } else if (e.type == ViewEvent::Type::Rec) {
            sim_view_.events.push_back(e);
            for (auto it = sim_pending_.begin(); it != sim_pending_.end(); ++it) {
                if (it->from == e.b && it->to == e.a && it->index == e.index) {
                    sim_pending_.erase(it);
                    break;
                }
            }
        } else if (e.type == ViewEvent::Type::Done && repeating_ && *repeating_ == e.a) {
            if (!sent_in_turn_ || repeats_ > bound_) {
                sim_view_.events.push_back(
                    ViewEvent{ViewEvent::Type::Sch, e.a, 0, 0, std::nullopt});
                for (ViewEvent& s : burst_snds_) {
                    sim_pending_.push_back(PendingMsg{s.a, s.b, s.index, 0, std::nullopt});
                    sim_view_.events.push_back(s);
                }
                burst_snds_.clear();
                sim_view_.events.push_back(
                    ViewEvent{ViewEvent::Type::Done, e.a, 0, 0, std::nullopt});
                repeating_.reset();
            }
        }
    }
    if (repeating_) {
        ++repeats_;
        sent_in_turn_ = false;
        return SchedAction::schedule(*repeating_);
    }
    SchedAction a = inner_->act(sim_view_, sim_pending_, halted, rng);
    if (a.kind == SchedAction::Kind::Schedule) {
        repeating_ = a.who;
        repeats_ = 1;
        sent_in_turn_ = false;
    }
    return a;
}

void BcgSchedulerA::init(int n, bool mediator) {
    n_ = n;
    mediator_ = mediator;
    inner_->init(n, mediator);
    sim_view_.n = n;
    sim_view_.mediator = mediator;
    init_next_ = mediator ? 0 : 1;
}

SchedAction BcgSchedulerA::act(const SchedulerView& view, const std::vector<PendingMsg>& pending,
                               const std::vector<bool>& halted, RandomSource& rng) {
    while (cursor_ < view.events.size()) {
        const ViewEvent& e = view.events[cursor_++];
        if (e.type == ViewEvent::Type::Snd) {
            if (e.a == e.b) continue;  // wrapper token
            int idx = ++sim_chan_[{e.a, e.b}];
            burst_snds_.push_back(ViewEvent{ViewEvent::Type::Snd, e.a, e.b, idx, std::nullopt});
        } else if (e.type == ViewEvent::Type::Rec && e.a != e.b) {
            sim_view_.events.push_back(e);
            for (auto it = sim_pending_.begin(); it != sim_pending_.end(); ++it) {
                if (it->from == e.b && it->to == e.a && it->index == e.index) {
                    sim_pending_.erase(it);
                    break;
                }
            }
        } else if (e.type == ViewEvent::Type::Done && awaiting_turn_ && *awaiting_turn_ == e.a) {
            sim_view_.events.push_back(ViewEvent{ViewEvent::Type::Sch, e.a, 0, 0, std::nullopt});
            for (ViewEvent& s : burst_snds_) {
                sim_pending_.push_back(PendingMsg{s.a, s.b, s.index, 0, std::nullopt});
                sim_view_.events.push_back(s);
            }
            burst_snds_.clear();
            sim_view_.events.push_back(ViewEvent{ViewEvent::Type::Done, e.a, 0, 0, std::nullopt});
            awaiting_turn_.reset();
        }
    }
    if (init_next_ <= n_) {
        int who = init_next_++;
        if (who == 0 && !mediator_) who = init_next_++;
        return SchedAction::schedule(who);
    }
    SchedAction a = inner_->act(sim_view_, sim_pending_, halted, rng);
    if (a.kind == SchedAction::Kind::Schedule) {
        // deliver the agent's latest self token; the engine schedules it
        const PendingMsg* latest = nullptr;
        for (const PendingMsg& m : pending)
            if (m.from == a.who && m.to == a.who)
                if (!latest || m.index > latest->index) latest = &m;
        if (!latest) return a;  // first scheduling or a deviating agent
        awaiting_turn_ = a.who;
        return SchedAction::deliver(latest->from, latest->to, latest->index);
    }
    return a;
}

// --------------------------------------------------------------------------
// BCG wrapper.

namespace {

const std::string kProceedToken = "\x02proceed";

class BcgAgent final : public AgentProtocol {
  public:
    explicit BcgAgent(std::unique_ptr<AgentProtocol> inner) : inner_(std::move(inner)) {}
    void init(const AgentContext& ctx) override {
        AgentProtocol::init(ctx);
        inner_->init(ctx);
    }
    bool halted() const override { return inner_->halted(); }

    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override {
        std::vector<TurnAction> out;
        bool proceed = false;
        for (const ReceivedMsg& m : msgs) {
            if (m.from == ctx_.id && m.payload == kProceedToken) proceed = true;
            else buffered_.push_back(m);
        }
        if (first_) {
            first_ = false;
            out.push_back(send_to(ctx_.id, kProceedToken));
            return out;
        }
        if (!proceed) return out;
        std::vector<ReceivedMsg> take = std::move(buffered_);
        buffered_.clear();
        out = inner_->on_scheduled(take);
        out.push_back(send_to(ctx_.id, kProceedToken));
        return out;
    }

  private:
    std::unique_ptr<AgentProtocol> inner_;
    std::vector<ReceivedMsg> buffered_;
    bool first_ = true;
};

}  // namespace

std::unique_ptr<AgentProtocol> to_bcg_compatible(std::unique_ptr<AgentProtocol> inner) {
    return std::make_unique<BcgAgent>(std::move(inner));
}

RunFactory compiled_run_factory(const CompiledProtocol& proto,
                                std::function<std::unique_ptr<SchedulerPolicy>()> policy,
                                std::vector<std::string> inputs, int64_t fuel) {
    RunFactory f;
    f.n = proto.opts.n;
    f.mediator = false;
    f.inputs = std::move(inputs);
    f.make_agent = proto.make;
    f.make_policy = std::move(policy);
    f.fuel = fuel;
    f.labels_in_view = true;
    f.label_peek = peek_label;
    return f;
}

}  // namespace medsim
