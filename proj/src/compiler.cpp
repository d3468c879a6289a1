#include "medsim/compiler.hpp"

#include <algorithm>

namespace medsim {

using namespace plabel;

CompiledAgent::CompiledAgent(CompileOptions opts, std::unique_ptr<AgentProtocol> inner)
    : HubAgent(opts.t, opts.p), opts_(std::move(opts)), sim_(std::move(inner)) {
    lay_ = opts_.mediator.layout(opts_.p);
    mask_budget_ = mask_budget();
}

void CompiledAgent::init(const AgentContext& ctx) {
    // the simulated protocol keeps the canonical per-agent tape so its coin
    // flips replay the mediator-setting run; the compiled machinery forks its
    // own stream for sharings and masks
    AgentContext outer = ctx;
    if (ctx.fork_source) {
        own_rng_ = ctx.fork_source("compiled");
        outer.rng = own_rng_.get();
    }
    HubAgent::init(outer);
    AgentContext inner_ctx = ctx;
    inner_ctx.mediator_present = true;
    sim_->init(inner_ctx);
    h_shares_.assign(static_cast<std::size_t>(lay_.width()), Fp(0, p_));  // hardcoded empty tape
}

int CompiledAgent::mask_budget() const {
    // worst-case interactive multiplications of one simulated turn: the
    // permutation validity checks plus the step circuit
    int m_max = lay_.max_recv;
    int checks = opts_.n * (m_max * (m_max - 1) / 2 + m_max * m_max);
    std::vector<std::vector<int>> dummy(static_cast<std::size_t>(lay_.turns));
    for (auto& v : dummy)
        for (int j = 1; j <= opts_.n; ++j) v.push_back(j);
    int k4 = 0;
    for (int k = 1; k <= lay_.turns; ++k) {
        Circuit c = opts_.mediator.build_step(lay_, k, dummy, opts_.p);
        k4 = std::max(k4, c.interactive_muls());
    }
    return checks + k4 + 2;
}

void CompiledAgent::first_turn() {
    if (opts_.gated) {
        emit(send_to(ctx_.id, encode_wire({proceed_i(ctx_.id, proceed_i_counter_), 0, ""})));
        emit(send_to(ctx_.id, encode_wire({proceed_d(ctx_.id, 0), 0, ""})));
    }
    // h_{i,0} is empty and h^i_{d,0} is the hardcoded sharing of the empty
    // history; in naive mode the simulation advances on every scheduling.
}

bool CompiledAgent::on_raw(AgentId from, const WireMsg& m) {
    if (from != ctx_.id) return false;
    switch (m.label.kind) {
        case Kind::ProceedI:
            proceed_i_seen_ = true;
            return true;
        case Kind::ProceedD:
            proceed_d_max_ = std::max(proceed_d_max_, static_cast<int>(m.label.index));
            return true;
        case Kind::Milestone:
            return true;  // self-signal for the scheduler; no local effect
        default:
            return false;
    }
}

void CompiledAgent::advance_own_sim() {
    ++own_turns_;
    std::vector<ReceivedMsg> msgs;
    msgs.reserve(recon_queue_.size());
    int idx = 0;
    for (int code : recon_queue_)
        msgs.push_back(ReceivedMsg{kMediator, opts_.mediator.sym_str(code), ++idx});
    recon_queue_.clear();
    if (sim_->halted()) return;
    auto actions = sim_->on_scheduled(msgs);
    const int cap = opts_.mediator.per_agent_bound;
    for (auto& a : actions) {
        switch (a.kind) {
            case TurnAction::Kind::Snd: {
                if (a.to != kMediator) break;  // honest-form protocols only talk to d
                auto [tag, sym] = parse_tag(a.payload);
                (void)tag;
                int code = opts_.mediator.sym_code(sym);
                if (code == 0) break;
                if (vss_counter_ >= cap) break;  // the mediator would ignore it
                ++vss_counter_;
                hub().start_vss(msg_vss(ctx_.id, vss_counter_), {Fp(static_cast<uint32_t>(code), p_)});
                break;
            }
            case TurnAction::Kind::Out:
                out_value(a.payload);
                break;
            case TurnAction::Kind::Comp:
                emit(compute(a.payload));
                break;
        }
    }
}

void CompiledAgent::enqueue_mediator_message(int code) {
    recon_queue_.push_back(code);
    if (opts_.mediator.is_stop(code)) {
        // a reconstructed STOP terminates the recipient: flush the pending
        // reconstructions through the simulation and halt
        stop_seen_ = true;
        advance_own_sim();
        halt();
    }
}

void CompiledAgent::on_message_vss_complete(const InstanceLabel& label) {
    auto key = std::make_pair(static_cast<int>(label.initiator), static_cast<int>(label.index));
    if (completion_seq_.count(key)) return;
    completion_seq_[key] = next_seq_++;
    if (opts_.emit_milestones)
        emit(send_to(ctx_.id,
                     encode_wire({milestone_vss(ctx_.id, key.first, key.second), 0, ""})));
}

void CompiledAgent::start_round() {
    round_ = completed_rounds_ + 1;
    phase_ = Phase::K1;
    accepted_.clear();
    sigma_core_.clear();
    member_valid_.clear();
    check_results_.clear();
    checks_opened_.clear();
    ranks_.clear();
    theta_.clear();
    probe_vals_.clear();
    tilde_pending_.reset();
    g_sent_ = false;
    pool_used_ = 0;
    pools_.emplace_back(&hub(), kMaskIdx, static_cast<uint16_t>(round_), mask_budget_, 0);
    pools_.back().start(*ctx_.rng);

    const int N = opts_.mediator.per_agent_bound;
    if (opts_.bounded && round_ >= 2) {
        Hub* h = &hub();
        int n = opts_.n;
        auto* ever = &accepted_ever_;
        hub().start_acs(k1_acs(round_), 1, n * N, [h, n, N, ever] {
            std::set<int> u;
            for (int j = 1; j <= n; ++j)
                for (int l = 1; l <= N; ++l)
                    if (!ever->count({j, l}) && h->has_result(msg_vss(j, l)))
                        u.insert((j - 1) * N + l);
            return u;
        });
        return;
    }
    for (int j = 1; j <= opts_.n; ++j)
        for (int l = 1; l <= N; ++l) {
            int input = !accepted_ever_.count({j, l}) && hub().has_result(msg_vss(j, l)) ? 1 : 0;
            hub().start_consensus(k1_cons(j, l, round_), input);
        }
    if (N == 0) k1_try_finish();
}

void CompiledAgent::k1_try_finish() {
    if (phase_ != Phase::K1) return;
    const int N = opts_.mediator.per_agent_bound;
    std::vector<std::pair<int, int>> accepted;
    if (opts_.bounded && round_ >= 2) {
        if (!hub().has_result(k1_acs(round_))) return;
        for (int e : hub().result(k1_acs(round_)).elems)
            accepted.emplace_back((e - 1) / N + 1, (e - 1) % N + 1);
        std::sort(accepted.begin(), accepted.end());
    } else {
        for (int j = 1; j <= opts_.n; ++j)
            for (int l = 1; l <= N; ++l) {
                if (!hub().has_result(k1_cons(j, l, round_))) return;
                if (hub().result(k1_cons(j, l, round_)).tag == 1) accepted.emplace_back(j, l);
            }
    }
    // wait until every accepted sharing is locally complete
    for (auto& [j, l] : accepted)
        if (!hub().has_result(msg_vss(j, l))) return;
    k2_start(std::move(accepted));
}

void CompiledAgent::k2_start(std::vector<std::pair<int, int>> accepted) {
    accepted_ = std::move(accepted);
    for (auto& jl : accepted_) accepted_ever_.insert(jl);
    if (ctx_.recorder) {
        std::string a;
        for (auto& [j, l] : accepted_) a += std::to_string(j) + ":" + std::to_string(l) + ";";
        ctx_.recorder->log(ctx_.id, "pipeline", "accepted/" + std::to_string(round_), a);
    }
    const int m = static_cast<int>(accepted_.size());
    if (m <= 1) {
        std::vector<int> order(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
        k2_finish(std::move(order));
        return;
    }
    phase_ = Phase::K2Sigma;
    // my completion order over the accepted instances
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return completion_seq_.at(accepted_[static_cast<std::size_t>(a)]) <
               completion_seq_.at(accepted_[static_cast<std::size_t>(b)]);
    });
    std::vector<Fp> sigma(static_cast<std::size_t>(m), Fp(0, p_));
    for (int pos = 0; pos < m; ++pos)
        sigma[static_cast<std::size_t>(idx[static_cast<std::size_t>(pos)])] =
            Fp(static_cast<uint32_t>(pos + 1), p_);
    hub().start_vss(sigma_vss(ctx_.id, round_), sigma);
    Hub* h = &hub();
    int n = opts_.n;
    int r = round_;
    hub().start_acs(sigma_acs(round_), n - t_, n, [h, n, r] {
        std::set<int> u;
        for (int j = 1; j <= n; ++j)
            if (h->has_result(sigma_vss(j, r))) u.insert(j);
        return u;
    });
}

void CompiledAgent::k2_try_checks() {
    if (phase_ != Phase::K2Sigma) return;
    if (!hub().has_result(sigma_acs(round_)) || !pools_.back().ready()) return;
    sigma_core_ = hub().result(sigma_acs(round_)).elems;
    phase_ = Phase::K2Check;
    member_checks_.clear();
    const int m = static_cast<int>(accepted_.size());
    // one check circuit shape per round; every member evaluation reuses it
    circuits_.emplace_back();
    {
        Circuit& c = circuits_.back();
        std::vector<int> ins;
        for (int a = 0; a < m; ++a) ins.push_back(c.in(a));
        // distinctness: product of pairwise differences
        int prod = -1;
        for (int a = 0; a < m; ++a)
            for (int b = a + 1; b < m; ++b) {
                int d = c.csub(ins[static_cast<std::size_t>(a)],
                               ins[static_cast<std::size_t>(b)], p_);
                prod = prod < 0 ? d : c.mul(prod, d);
            }
        c.out(prod);
        // range: prod_v (sigma_a - v) per position, zero iff in [1..m]
        for (int a = 0; a < m; ++a) {
            int rp = -1;
            for (int v = 1; v <= m; ++v) {
                int d = c.affine({{ins[static_cast<std::size_t>(a)], 1}},
                                 static_cast<uint32_t>(p_ - static_cast<uint32_t>(v) % p_), p_);
                rp = rp < 0 ? d : c.mul(rp, d);
            }
            c.out(rp);
        }
    }
    const Circuit* check = &circuits_.back();
    for (int member : sigma_core_) {
        member_checks_[member] = check;
        MaskPool* pool = &pools_.back();
        int off = pool_used_;
        pool_used_ += check->interactive_muls();
        hub().start_cc(check_cc(member, round_), check,
                       hub().result(sigma_vss(member, round_)).values,
                       [pool, off](int seq) { return pool->mask(off + seq); });
    }
}

void CompiledAgent::k2_try_ranks() {
    if (phase_ != Phase::K2Check) return;
    for (int member : sigma_core_)
        if (!checks_opened_.count(member)) return;
    phase_ = Phase::K2Rank;
    const int m = static_cast<int>(accepted_.size());
    for (int member : sigma_core_) {
        const auto& vals = check_results_.at(member);
        bool valid = !vals.at(0).zero();
        for (int a = 1; a <= m && valid; ++a)
            if (!vals.at(static_cast<std::size_t>(a)).zero()) valid = false;
        member_valid_[member] = valid;
    }
    ranks_.assign(static_cast<std::size_t>(m), std::nullopt);
    for (int a = 0; a < m; ++a) {
        Fp share(0, p_);
        uint32_t identity_sum = 0;
        for (int j = 1; j <= opts_.n; ++j) {
            bool in_core =
                std::find(sigma_core_.begin(), sigma_core_.end(), j) != sigma_core_.end();
            if (in_core && member_valid_.at(j)) {
                share = share + hub().result(sigma_vss(j, round_)).values.at(
                                    static_cast<std::size_t>(a));
            } else {
                identity_sum += static_cast<uint32_t>(a + 1);  // identity permutation
            }
        }
        share = share + Fp(identity_sum, p_);
        hub().open_contribute(rank_open(a, round_), 0, share, t_, 2 * t_ + 1);
    }
}

void CompiledAgent::k2_finish(std::vector<int> order) {
    theta_ = std::move(order);
    if (ctx_.recorder) {
        std::string o;
        for (int pos : theta_) {
            auto [j, l] = accepted_[static_cast<std::size_t>(pos)];
            o += std::to_string(j) + ":" + std::to_string(l) + ";";
        }
        ctx_.recorder->log(ctx_.id, "pipeline", "theta/" + std::to_string(round_), o);
    }
    k3_start();
}

void CompiledAgent::k3_start() {
    const int m = static_cast<int>(accepted_.size());
    bool record = round_ == 1 || m > 0 || !opts_.mediator.responsive;
    if (!record) {
        finish_round();
        return;
    }
    phase_ = Phase::K3;
    ++blocks_;
    if (blocks_ > lay_.turns)
        throw EncodingOverflow("mediator history exceeds the layout bound");
    std::vector<int> slist;
    for (int pos : theta_) slist.push_back(accepted_[static_cast<std::size_t>(pos)].first);
    senders_by_turn_.push_back(slist);

    circuits_.emplace_back();
    Circuit& c = circuits_.back();
    std::vector<int> in(static_cast<std::size_t>(lay_.width()));
    for (int i = 0; i < lay_.width(); ++i) in[static_cast<std::size_t>(i)] = c.in(i);
    std::vector<int> msg_in;
    for (int a = 0; a < m; ++a) msg_in.push_back(c.in(lay_.width() + a));
    for (int slot = 0; slot < lay_.width(); ++slot) {
        bool written = false;
        if (slot == lay_.slot_rc(blocks_)) {
            c.out(c.konst(static_cast<uint32_t>(m)));
            written = true;
        }
        for (int a = 0; a < m && !written; ++a) {
            if (slot == lay_.slot_rec_sender(blocks_, a)) {
                c.out(c.konst(static_cast<uint32_t>(slist[static_cast<std::size_t>(a)])));
                written = true;
            } else if (slot == lay_.slot_rec_sym(blocks_, a)) {
                c.out(msg_in[static_cast<std::size_t>(a)]);
                written = true;
            }
        }
        if (!written) c.out(in[static_cast<std::size_t>(slot)]);
    }
    std::vector<Fp> inputs = h_shares_;
    for (int pos : theta_) {
        auto [j, l] = accepted_[static_cast<std::size_t>(pos)];
        if (!hub().has_result(msg_vss(j, l)))
            throw Error("compiled pipeline: unbound circuit input sharing");
        inputs.push_back(hub().result(msg_vss(j, l)).values.at(0));
    }
    hub().start_cc(k3_cc(round_), &circuits_.back(), std::move(inputs),
                   [](int) -> std::pair<Fp, Fp> {
                       throw Error("k3 circuit has no multiplications");
                   });
}

void CompiledAgent::k4_start(std::vector<Fp> tilde) {
    phase_ = Phase::K4;
    circuits_.push_back(opts_.mediator.build_step(lay_, blocks_, senders_by_turn_, opts_.p));
    MaskPool* pool = &pools_.back();
    int off = pool_used_;
    pool_used_ += circuits_.back().interactive_muls();
    hub().start_cc(k4_cc(round_), &circuits_.back(), std::move(tilde),
                   [pool, off](int seq) { return pool->mask(off + seq); });
}

void CompiledAgent::extract_start(std::vector<Fp> next) {
    phase_ = Phase::Extract;
    h_shares_ = std::move(next);
    probe_vals_.assign(static_cast<std::size_t>(lay_.max_send), std::nullopt);
    for (int l = 0; l < lay_.max_send; ++l) {
        Fp share = h_shares_.at(static_cast<std::size_t>(lay_.slot_snd_rcpt(blocks_, l)));
        hub().open_contribute(probe_open(l, round_), 0, share, t_, 2 * t_ + 1);
    }
}

void CompiledAgent::extract_try_deliver() {
    if (phase_ != Phase::Extract || g_sent_) return;
    for (auto& v : probe_vals_)
        if (!v) return;
    g_sent_ = true;
    if (ctx_.recorder) {
        std::string fs;
        for (auto& v : probe_vals_) fs += std::to_string(*v) + ",";
        ctx_.recorder->log(ctx_.id, "pipeline", "f/" + std::to_string(round_), fs);
    }
    // a directed reconstruction waits for one confirming share beyond the
    // recipient's own, so delivery control stays with the scheduler even at
    // t = 0 where a single share already determines the value
    const int agree = std::max(2 * t_ + 1, std::min(2, opts_.n));
    for (int l = 0; l < lay_.max_send; ++l) {
        uint32_t rcpt = *probe_vals_[static_cast<std::size_t>(l)];
        if (rcpt < 1 || rcpt > static_cast<uint32_t>(opts_.n)) continue;
        Fp gshare = h_shares_.at(static_cast<std::size_t>(lay_.slot_snd_sym(blocks_, l)));
        if (static_cast<int>(rcpt) == ctx_.id) {
            hub().directed_open_expect(g_open(l, round_), 0, t_, agree);
            hub().send_open_share(g_open(l, round_), ctx_.id, 0, gshare);
        } else {
            hub().send_open_share(g_open(l, round_), static_cast<AgentId>(rcpt), 0, gshare);
        }
    }
    finish_round();
}

void CompiledAgent::finish_round() {
    completed_rounds_ = round_;
    phase_ = Phase::Idle;
    if (ctx_.recorder)
        ctx_.recorder->log(ctx_.id, "pipeline", "round_done/" + std::to_string(round_), "");
    if (opts_.emit_milestones)
        emit(send_to(ctx_.id, encode_wire({milestone_stage(ctx_.id, round_), 0, ""})));
}

void CompiledAgent::process() {
    if (halted()) return;
    // 1. fold hub completions into pipeline state
    auto& q = hub().completions();
    while (!q.empty()) {
        Completion c = std::move(q.front());
        q.pop_front();
        const InstanceLabel& lb = c.label;
        if (lb.kind == Kind::Vss && lb.round == 0 && lb.index >= 1 &&
            lb.index <= static_cast<uint16_t>(std::max(1, opts_.mediator.per_agent_bound))) {
            on_message_vss_complete(lb);
        } else if (lb.kind == Kind::Open && lb.initiator == kDirectedNs) {
            enqueue_mediator_message(static_cast<int>(c.values.at(0).v));
            if (halted()) return;
        } else if (lb.kind == Kind::Open && lb.round == static_cast<uint16_t>(round_)) {
            if (lb.index >= kProbeBase && lb.index < kProbeBase + lay_.max_send &&
                phase_ == Phase::Extract) {
                probe_vals_.at(lb.index - kProbeBase) = c.values.at(0).v;
            } else if (lb.index >= kRankBase &&
                       lb.index < kRankBase + static_cast<uint16_t>(accepted_.size()) &&
                       phase_ == Phase::K2Rank) {
                ranks_.at(lb.index - kRankBase) = c.values.at(0);
            }
        } else if (lb.kind == Kind::Cc && lb.round == static_cast<uint16_t>(round_)) {
            if (lb == k3_cc(round_) && phase_ == Phase::K3) {
                tilde_pending_ = c.values;  // the step circuit waits for masks
            } else if (lb == k4_cc(round_) && phase_ == Phase::K4) {
                extract_start(c.values);
            } else if (lb.index >= kCheckBase && lb.index < kRankBase) {
                // a member's validity check finished; open its outputs
                int member = lb.index - kCheckBase;
                for (std::size_t i = 0; i < c.values.size(); ++i)
                    hub().open_contribute(check_open(member, round_), static_cast<int>(i),
                                          c.values[i], t_, 2 * t_ + 1);
            }
        }
    }
    // the check opens complete per component; collect them once all present
    if (phase_ == Phase::K2Check) {
        const int m = static_cast<int>(accepted_.size());
        for (int member : sigma_core_) {
            if (checks_opened_.count(member)) continue;
            bool all = true;
            std::vector<Fp> vals;
            for (int i = 0; i <= m; ++i) {
                if (!hub().has_result(check_open(member, round_), i)) {
                    all = false;
                    break;
                }
                vals.push_back(hub().result(check_open(member, round_), i).values.at(0));
            }
            if (all) {
                check_results_[member] = std::move(vals);
                checks_opened_.insert(member);
            }
        }
    }

    // 2. own-history gating
    bool advance = opts_.gated ? proceed_i_seen_ : true;
    if (advance && !sim_->halted() && !stop_seen_) {
        proceed_i_seen_ = false;
        if (opts_.gated) {
            ++proceed_i_counter_;
            emit(send_to(ctx_.id,
                         encode_wire({proceed_i(ctx_.id, proceed_i_counter_), 0, ""})));
        }
        advance_own_sim();
        if (halted()) return;
    }

    // 3. mediator-pipeline gating and phase progression
    if (opts_.gated && proceed_d_max_ >= proceed_d_sent_) {
        proceed_d_sent_ = proceed_d_max_ + 1;
        emit(send_to(ctx_.id, encode_wire({proceed_d(ctx_.id, proceed_d_sent_), 0, ""})));
    }
    bool enabled = opts_.gated ? completed_rounds_ <= proceed_d_max_ : true;
    if (enabled && opts_.bounded && completed_rounds_ >= 1) {
        // later bounded turns exist only to consume a message; wait for one
        bool eligible = false;
        const int N = opts_.mediator.per_agent_bound;
        for (int j = 1; j <= opts_.n && !eligible; ++j)
            for (int l = 1; l <= N && !eligible; ++l)
                if (!accepted_ever_.count({j, l}) && hub().has_result(msg_vss(j, l)))
                    eligible = true;
        enabled = eligible;
    }
    if (phase_ == Phase::Idle && enabled && !stop_seen_) start_round();
    if (phase_ == Phase::K1) k1_try_finish();
    if (phase_ == Phase::K3 && tilde_pending_ && pools_.back().ready()) {
        std::vector<Fp> tilde = std::move(*tilde_pending_);
        tilde_pending_.reset();
        k4_start(std::move(tilde));
    }
    if (phase_ == Phase::K2Sigma) k2_try_checks();
    if (phase_ == Phase::K2Check) k2_try_ranks();
    if (phase_ == Phase::K2Rank) {
        bool all = true;
        for (auto& r : ranks_)
            if (!r) all = false;
        if (all && !ranks_.empty()) {
            const int m = static_cast<int>(accepted_.size());
            std::vector<int> order(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                uint32_t ra = ranks_[static_cast<std::size_t>(a)]->v;
                uint32_t rb = ranks_[static_cast<std::size_t>(b)]->v;
                return ra != rb ? ra < rb : a < b;
            });
            k2_finish(std::move(order));
        }
    }
    if (phase_ == Phase::Extract) extract_try_deliver();
}

CompiledProtocol compile(const MediatorSpec& mediator,
                         std::function<std::unique_ptr<AgentProtocol>(AgentId)> inner, int n,
                         int t, uint32_t p, bool gated) {
    if (n <= 4 * t) throw ConfigError("compile requires n > 4t");
    if (!is_prime(p)) throw ConfigError("compile: p must be prime");
    CompileOptions opts;
    opts.n = n;
    opts.t = t;
    opts.p = p;
    opts.mediator = mediator;
    opts.mediator.n = n;
    opts.gated = gated;
    opts.mediator.layout(p);  // validates the alphabet/state/agent bound
    return {opts, [opts, inner](AgentId id) {
                return std::make_unique<CompiledAgent>(opts, inner(id));
            }};
}

CompiledProtocol compile_bounded(const MediatorSpec& mediator,
                                 std::function<std::unique_ptr<AgentProtocol>(AgentId)> inner,
                                 int n, int t, uint32_t p) {
    if (!mediator.responsive || !mediator.canonical)
        throw ConfigError("compile_bounded requires a responsive canonical mediator");
    CompiledProtocol out = compile(mediator, inner, n, t, p, true);
    out.opts.bounded = true;
    CompileOptions opts = out.opts;
    out.make = [opts, inner](AgentId id) {
        return std::make_unique<CompiledAgent>(opts, inner(id));
    };
    return out;
}

}  // namespace medsim
