#include "medsim/hub.hpp"

#include <algorithm>
#include <cassert>

#include "medsim/circuit.hpp"
#include "medsim/subkinds.hpp"

namespace medsim {

// ---------------------------------------------------------------------------
// RobustDecoder

bool RobustDecoder::add(int idx, Fp val) {
    if (result_) return false;
    if (entries_.has(idx)) return false;  // first value from a sender binds
    entries_.set(idx, val);
    if (static_cast<int>(entries_.size()) < degree_ + 1) return false;
    try {
        Poly cand = rs_decode(entries_, degree_, max_errors_);
        int agree = 0;
        for (const auto& [i, v] : entries_.entries)
            if (cand.eval(Fp(i, p_)) == v) ++agree;
        if (agree >= agree_) {
            result_ = cand;
            return true;
        }
    } catch (const DecodeFailure&) {
    }
    return false;
}

// ---------------------------------------------------------------------------
// InstanceCtx

void InstanceCtx::send(AgentId to, uint8_t subkind, const std::string& body) {
    if (to == self) {
        hub->enqueue_local(label, subkind, body);
        return;
    }
    WireMsg m{label, subkind, body};
    hub->out_.push_back(send_to(to, encode_wire(m)));
}

void InstanceCtx::send_all(uint8_t subkind, const std::string& body) {
    for (int j = 1; j <= n; ++j) send(j, subkind, body);
}

void InstanceCtx::complete(Completion c) {
    c.label = label;
    hub->record(std::move(c));
}

uint32_t InstanceCtx::coin(int tag, int round) const {
    return hub->actx_.coin->coin(label.str() + "/" + std::to_string(tag), round);
}

RandomSource& InstanceCtx::rng() const { return *hub->actx_.rng; }

void InstanceCtx::note(const std::string& tag, const std::string& info) const {
    if (hub->actx_.recorder) hub->actx_.recorder->log(self, tag, label.str(), info);
}

// ---------------------------------------------------------------------------
// Bracha reliable broadcast core (echo/ready), reusable per payload channel.

namespace {

using sub::BcInit; using sub::BcEcho; using sub::BcReady;

class BrachaCore {
  public:
    BrachaCore(int n, int t) : n_(n), t_(t) {}
    std::function<void(uint8_t phase, const std::string& payload)> emit;
    std::function<void(const std::string&)> deliver;

    void start(const std::string& payload) { emit(BcInit, payload); }

    void on(AgentId from, uint8_t phase, const std::string& payload) {
        if (delivered_) return;
        switch (phase) {
            case BcInit:
                if (!echoed_) {
                    echoed_ = true;
                    emit(BcEcho, payload);
                }
                break;
            case BcEcho: {
                auto& s = echoes_[payload];
                s.insert(from);
                if (2 * static_cast<int>(s.size()) > n_ + t_ && !ready_sent_) {
                    ready_sent_ = true;
                    emit(BcReady, payload);
                }
                break;
            }
            case BcReady: {
                auto& s = readies_[payload];
                s.insert(from);
                if (static_cast<int>(s.size()) >= t_ + 1 && !ready_sent_) {
                    ready_sent_ = true;
                    emit(BcReady, payload);
                }
                if (static_cast<int>(s.size()) >= 2 * t_ + 1) {
                    delivered_ = true;
                    deliver(payload);
                }
                break;
            }
            default: break;
        }
    }

  private:
    int n_, t_;
    bool echoed_ = false, ready_sent_ = false, delivered_ = false;
    std::map<std::string, std::set<AgentId>> echoes_, readies_;
};

class BcastMachine final : public Instance {
  public:
    void wire() {
        core_ = std::make_unique<BrachaCore>(ctx.n, ctx.t);
        core_->emit = [this](uint8_t phase, const std::string& payload) {
            ctx.send_all(phase, payload);
        };
        core_->deliver = [this](const std::string& payload) {
            Completion c;
            c.data = payload;
            ctx.complete(std::move(c));
        };
    }
    void start(const std::string& payload) { core_->start(payload); }
    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        core_->on(from, subkind, body);
    }

  private:
    std::unique_ptr<BrachaCore> core_;
};

// ---------------------------------------------------------------------------
// Binary consensus with the engine coin: BV-broadcast rounds plus a decide
// amplification so every honest agent halts.

using sub::CnBval; using sub::CnAux; using sub::CnDecide;

class ConsensusCore {
  public:
    ConsensusCore(int n, int t,
                  std::function<void(uint8_t, uint16_t round, uint8_t val)> emit,
                  std::function<uint32_t(int round)> coin, std::function<void(int)> on_final)
        : n_(n), t_(t), emit_(std::move(emit)), coin_(std::move(coin)),
          on_final_(std::move(on_final)) {}

    void set_input(int v) {
        if (input_set_) return;
        input_set_ = true;
        est_ = v;
        enter_round(1);
        check();
    }

    void on_bval(AgentId from, int round, int value) {
        auto& senders = bval_[{round, value}];
        if (!senders.insert(from).second) return;
        int cnt = static_cast<int>(senders.size());
        if (cnt >= t_ + 1 && !bval_sent_[{round, value}]) {
            bval_sent_[{round, value}] = true;
            emit_(CnBval, static_cast<uint16_t>(round), static_cast<uint8_t>(value));
        }
        if (cnt >= 2 * t_ + 1) bin_values_[round].insert(value);
        check();
    }

    void on_aux(AgentId from, int round, int value) {
        aux_[round].emplace(from, value);
        check();
    }

    void on_decide(AgentId from, int value) {
        auto& senders = decide_[value];
        if (!senders.insert(from).second) return;
        int cnt = static_cast<int>(senders.size());
        if (cnt >= t_ + 1 && !decide_sent_) {
            decide_sent_ = true;
            decided_ = value;
            emit_(CnDecide, 0, static_cast<uint8_t>(value));
        }
        if (cnt >= 2 * t_ + 1 && !finalized_) {
            finalized_ = true;
            on_final_(value);
        }
        check();
    }

    void check() {
        if (!input_set_ || finalized_) return;
        for (;;) {
            const auto& bv = bin_values_[round_];
            if (bv.empty()) return;
            if (!aux_sent_) {
                aux_sent_ = true;
                aux_value_ = *bv.begin();
                emit_(CnAux, static_cast<uint16_t>(round_), static_cast<uint8_t>(aux_value_));
            }
            std::set<int> vals;
            int support = 0;
            for (const auto& [from, v] : aux_[round_]) {
                if (bv.count(v)) {
                    ++support;
                    vals.insert(v);
                }
            }
            if (support < n_ - t_) return;
            uint32_t c = coin_(round_);
            if (vals.size() == 1) {
                int v = *vals.begin();
                est_ = v;
                if (static_cast<uint32_t>(v) == c && !decide_sent_) {
                    decide_sent_ = true;
                    decided_ = v;
                    emit_(CnDecide, 0, static_cast<uint8_t>(v));
                }
            } else {
                if (!decided_) est_ = static_cast<int>(c);
            }
            enter_round(round_ + 1);
        }
    }

    bool finalized() const { return finalized_; }

  private:
    void enter_round(int r) {
        round_ = r;
        aux_sent_ = false;
        if (!bval_sent_[{r, est_}]) {
            bval_sent_[{r, est_}] = true;
            emit_(CnBval, static_cast<uint16_t>(r), static_cast<uint8_t>(est_));
        }
    }

    int n_, t_;
    std::function<void(uint8_t, uint16_t, uint8_t)> emit_;
    std::function<uint32_t(int)> coin_;
    std::function<void(int)> on_final_;
    bool input_set_ = false, aux_sent_ = false, decide_sent_ = false, finalized_ = false;
    int est_ = 0, round_ = 0, aux_value_ = 0;
    std::optional<int> decided_;
    std::map<std::pair<int, int>, std::set<AgentId>> bval_;
    std::map<std::pair<int, int>, bool> bval_sent_;
    std::map<int, std::set<int>> bin_values_;
    std::map<int, std::map<AgentId, int>> aux_;
    std::map<int, std::set<AgentId>> decide_;
};

// Body: u16 elem, u16 round, u8 value.
std::string cons_body(uint16_t elem, uint16_t round, uint8_t val) {
    ByteWriter w;
    w.u16(elem);
    w.u16(round);
    w.u8(val);
    return w.take();
}

class ConsMachine final : public Instance {
  public:
    void wire() {
        core_ = std::make_unique<ConsensusCore>(
            ctx.n, ctx.t,
            [this](uint8_t sub, uint16_t round, uint8_t val) {
                ctx.send_all(sub, cons_body(0, round, val));
            },
            [this](int round) { return ctx.coin(0, round); },
            [this](int v) {
                Completion c;
                c.tag = v;
                ctx.complete(std::move(c));
            });
    }
    void set_input(int v) { core_->set_input(v); }
    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        ByteReader r(body);
        r.u16();  // elem, unused for standalone
        uint16_t round = r.u16();
        uint8_t val = r.u8();
        if (val > 1) return;
        switch (subkind) {
            case CnBval: core_->on_bval(from, round, val); break;
            case CnAux: core_->on_aux(from, round, val); break;
            case CnDecide: core_->on_decide(from, val); break;
            default: break;
        }
    }

  private:
    std::unique_ptr<ConsensusCore> core_;
};

// ---------------------------------------------------------------------------
// Verifiable secret sharing: batched bivariate cross-checking. The dealer
// samples one degree-(t,t) bivariate per component with F(0,0) = secret,
// hands agent i the row F(i,.) and column F(.,i); pairs cross-check points;
// OK-sets travel by embedded reliable broadcast; sharing fixes on an
// (n-t)-clique of mutual OKs. Members repair non-members' rows, and
// completion is gated on n-t Ready messages.

using sub::VsRowCol; using sub::VsChk; using sub::VsRepair; using sub::VsReady; using sub::VsVoteBase;

class VssMachine final : public Instance {
  public:
    void deal(const std::vector<Fp>& secrets) {
        const int t = ctx.t;
        const uint32_t p = ctx.p;
        B_ = static_cast<int>(secrets.size());
        // coeff[a][b] of x^a y^b, uniform except [0][0].
        std::vector<std::vector<std::vector<Fp>>> F(
            static_cast<std::size_t>(B_),
            std::vector<std::vector<Fp>>(static_cast<std::size_t>(t) + 1,
                                         std::vector<Fp>(static_cast<std::size_t>(t) + 1)));
        for (int b = 0; b < B_; ++b)
            for (int a1 = 0; a1 <= t; ++a1)
                for (int a2 = 0; a2 <= t; ++a2)
                    F[b][a1][a2] = (a1 == 0 && a2 == 0)
                                       ? secrets[static_cast<std::size_t>(b)]
                                       : Fp(ctx.rng().below(p), p);
        for (int i = 1; i <= ctx.n; ++i) {
            ByteWriter w;
            w.u16(static_cast<uint16_t>(B_));
            for (int b = 0; b < B_; ++b) {
                // row_i(y) = F(i, y), col_i(x) = F(x, i)
                for (int a2 = 0; a2 <= t; ++a2) {
                    Fp c(0, p);
                    Fp xi(1, p);
                    for (int a1 = 0; a1 <= t; ++a1) {
                        c = c + F[b][a1][a2] * xi;
                        xi = xi * Fp(i, p);
                    }
                    w.u32(c.v);
                }
                for (int a1 = 0; a1 <= t; ++a1) {
                    Fp c(0, p);
                    Fp yi(1, p);
                    for (int a2 = 0; a2 <= t; ++a2) {
                        c = c + F[b][a1][a2] * yi;
                        yi = yi * Fp(i, p);
                    }
                    w.u32(c.v);
                }
            }
            ctx.send(i, VsRowCol, w.take());
        }
    }

    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        try {
            dispatch(from, subkind, body);
        } catch (const Error&) {
            // malformed instance message: dropped
        }
    }

    void dispatch(AgentId from, uint8_t subkind, const std::string& body) {
        switch (subkind) {
            case VsRowCol: on_rowcol(from, body); break;
            case VsChk: on_chk(from, body); break;
            case VsRepair: on_repair(from, body); break;
            case VsReady:
                if (ready_from_.insert(from).second) try_complete();
                break;
            default:
                if (subkind >= VsVoteBase && subkind < VsVoteBase + 3)
                    on_vote_phase(from, static_cast<uint8_t>(subkind - VsVoteBase), body);
                break;
        }
    }

  private:
    void on_rowcol(AgentId from, const std::string& body) {
        if (from != ctx.label.initiator || have_polys_) return;
        ByteReader r(body);
        int B = r.u16();
        if (B <= 0 || B > 4096) return;
        if (B_ >= 0 && B != B_) return;
        B_ = B;
        const int t = ctx.t;
        const uint32_t p = ctx.p;
        rows_.clear();
        cols_.clear();
        for (int b = 0; b < B_; ++b) {
            std::vector<Fp> rc, cc;
            for (int k = 0; k <= t; ++k) rc.emplace_back(r.u32(), p);
            for (int k = 0; k <= t; ++k) cc.emplace_back(r.u32(), p);
            rows_.emplace_back(rc, p);
            cols_.emplace_back(cc, p);
        }
        have_polys_ = true;
        // cross points to every peer: row_self(j)
        for (int j = 1; j <= ctx.n; ++j) {
            ByteWriter w;
            w.u16(static_cast<uint16_t>(B_));
            for (int b = 0; b < B_; ++b)
                w.u32(rows_[static_cast<std::size_t>(b)].eval(Fp(j, p)).v);
            ctx.send(j, VsChk, w.take());
        }
        // self-consistency
        bool ok = true;
        for (int b = 0; b < B_; ++b)
            if (rows_[static_cast<std::size_t>(b)].eval(Fp(ctx.self, p)) !=
                cols_[static_cast<std::size_t>(b)].eval(Fp(ctx.self, p)))
                ok = false;
        if (ok) add_ok(ctx.self);
        // re-verify buffered checks
        for (auto& [j, vals] : chk_buffer_) verify_chk(j, vals);
        chk_buffer_.clear();
    }

    void on_chk(AgentId from, const std::string& body) {
        ByteReader r(body);
        int B = r.u16();
        if (B <= 0 || B > 4096) return;
        std::vector<Fp> vals;
        for (int b = 0; b < B; ++b) vals.emplace_back(r.u32(), ctx.p);
        if (!have_polys_) {
            chk_buffer_[from] = vals;
            return;
        }
        verify_chk(from, vals);
    }

    void verify_chk(AgentId from, const std::vector<Fp>& vals) {
        if (static_cast<int>(vals.size()) != B_) return;
        // from's row at my index must equal my column at from's index
        for (int b = 0; b < B_; ++b)
            if (vals[static_cast<std::size_t>(b)] !=
                cols_[static_cast<std::size_t>(b)].eval(Fp(from, ctx.p)))
                return;
        add_ok(from);
    }

    void add_ok(AgentId j) {
        uint32_t bit = 1u << j;
        if (okset_ & bit) return;
        okset_ |= bit;
        int size = __builtin_popcount(okset_);
        if (size >= ctx.n - ctx.t && okset_ != last_broadcast_) {
            last_broadcast_ = okset_;
            ++version_;
            ByteWriter w;
            w.u8(static_cast<uint8_t>(ctx.self));
            w.u8(version_);
            w.u32(okset_);
            vote_core(ctx.self, version_)->start(w.str());
        }
    }

    BrachaCore* vote_core(int voter, int version) {
        auto key = std::make_pair(voter, version);
        auto it = votes_.find(key);
        if (it == votes_.end()) {
            auto core = std::make_unique<BrachaCore>(ctx.n, ctx.t);
            BrachaCore* raw = core.get();
            core->emit = [this](uint8_t phase, const std::string& payload) {
                ctx.send_all(static_cast<uint8_t>(VsVoteBase + phase - 1), payload);
            };
            core->deliver = [this](const std::string& payload) {
                ByteReader r(payload);
                int voter = r.u8();
                r.u8();  // version
                uint32_t mask = r.u32();
                if (voter < 1 || voter > ctx.n) return;
                okmap_[voter] |= mask;
                on_votes_changed();
            };
            it = votes_.emplace(key, std::move(core)).first;
        }
        return it->second.get();
    }

    void on_vote_phase(AgentId from, uint8_t phase, const std::string& body) {
        ByteReader r(body);
        int voter = r.u8();
        int version = r.u8();
        if (voter < 1 || voter > ctx.n || version < 1 || version > 2 * ctx.n) return;
        vote_core(voter, version)->on(from, static_cast<uint8_t>(phase + 1), body);
    }

    void on_votes_changed() {
        if (clique_found_) {
            send_repairs();
            return;
        }
        // find a mutual-OK subset of size >= n-t
        int n = ctx.n;
        int need = n - ctx.t;
        std::vector<int> members;
        std::vector<int> pick;
        std::function<bool(int)> search = [&](int start) -> bool {
            if (static_cast<int>(pick.size()) == need) return true;
            for (int cand = start; cand <= n; ++cand) {
                bool ok = true;
                for (int m : pick) {
                    if (!(okmap_[m] & (1u << cand)) || !(okmap_[cand] & (1u << m))) {
                        ok = false;
                        break;
                    }
                }
                if (!(okmap_[cand] & (1u << cand))) ok = false;
                if (!ok) continue;
                pick.push_back(cand);
                if (search(cand + 1)) return true;
                pick.pop_back();
            }
            return false;
        };
        if (!search(1)) return;
        clique_found_ = true;
        clique_.assign(pick.begin(), pick.end());
        ctx.note("vss_clique", "");
        bool in_clique = std::find(clique_.begin(), clique_.end(), ctx.self) != clique_.end();
        if (in_clique && have_polys_) {
            shares_.clear();
            for (int b = 0; b < B_; ++b)
                shares_.push_back(rows_[static_cast<std::size_t>(b)].eval(Fp(0, ctx.p)));
            share_known_ = true;
            on_share_known();
        } else if (!share_known_) {
            // await repairs; batch width comes from the repair bodies when the
            // dealer never sent us usable polynomials
            awaiting_repair_ = true;
            auto buffered = std::move(repair_buffer_);
            repair_buffer_.clear();
            for (auto& [from, vals] : buffered) feed_repair(from, vals);
        }
        send_repairs();
    }

    void send_repairs() {
        if (!clique_found_ || !have_polys_ || repairs_sent_) return;
        bool in_clique = std::find(clique_.begin(), clique_.end(), ctx.self) != clique_.end();
        if (!in_clique) return;
        repairs_sent_ = true;
        for (int i = 1; i <= ctx.n; ++i) {
            if (std::find(clique_.begin(), clique_.end(), i) != clique_.end()) continue;
            ByteWriter w;
            w.u16(static_cast<uint16_t>(B_));
            for (int b = 0; b < B_; ++b)
                w.u32(cols_[static_cast<std::size_t>(b)].eval(Fp(i, ctx.p)).v);
            ctx.send(i, VsRepair, w.take());
        }
    }

    void on_repair(AgentId from, const std::string& body) {
        ByteReader r(body);
        int B = r.u16();
        if (B <= 0 || B > 4096) return;
        std::vector<Fp> vals;
        for (int b = 0; b < B; ++b) vals.emplace_back(r.u32(), ctx.p);
        if (share_known_) return;
        if (!awaiting_repair_) {
            repair_buffer_[from] = vals;
            return;
        }
        feed_repair(from, vals);
    }

    void feed_repair(AgentId from, const std::vector<Fp>& vals) {
        if (!awaiting_repair_ || vals.empty()) return;
        if (repair_decoders_.empty())
            repair_decoders_.assign(vals.size(), RobustDecoder(ctx.t, ctx.t, 2 * ctx.t + 1, ctx.p));
        if (vals.size() != repair_decoders_.size()) return;
        bool all = true;
        for (std::size_t b = 0; b < repair_decoders_.size(); ++b) {
            repair_decoders_[b].add(from, vals[b]);
            if (!repair_decoders_[b].done()) all = false;
        }
        if (all && !share_known_) {
            shares_.clear();
            for (auto& d : repair_decoders_) shares_.push_back(d.secret());
            share_known_ = true;
            on_share_known();
        }
    }

    void on_share_known() {
        ctx.note("vss_share_known", "");
        if (!ready_sent_) {
            ready_sent_ = true;
            ctx.send_all(VsReady, "");
        }
        try_complete();
    }

    void try_complete() {
        if (completed_ || !share_known_) return;
        if (static_cast<int>(ready_from_.size()) < ctx.n - ctx.t) return;
        completed_ = true;
        Completion c;
        c.values = shares_;
        ctx.complete(std::move(c));
    }

    int B_ = -1;
    bool have_polys_ = false;
    std::vector<Poly> rows_, cols_;
    std::map<AgentId, std::vector<Fp>> chk_buffer_;
    uint32_t okset_ = 0, last_broadcast_ = 0;
    int version_ = 0;
    std::map<std::pair<int, int>, std::unique_ptr<BrachaCore>> votes_;
    std::map<int, uint32_t> okmap_;
    bool clique_found_ = false, share_known_ = false, ready_sent_ = false, completed_ = false,
         repairs_sent_ = false, awaiting_repair_ = false;
    std::vector<int> clique_;
    std::vector<Fp> shares_;
    std::vector<RobustDecoder> repair_decoders_;
    std::map<AgentId, std::vector<Fp>> repair_buffer_;
    std::set<AgentId> ready_from_;
};

// ---------------------------------------------------------------------------
// Agreement on a core set: one embedded consensus per element; vote 1 when
// the element enters the local accumulative set, vote 0 on the rest once M1
// elements have decided 1; output once all decided and the core is local.

class AcsMachine final : public Instance {
  public:
    void configure(int m1, int m2, std::function<std::set<int>()> observer) {
        m1_ = m1;
        m2_ = m2;
        observer_ = std::move(observer);
        for (int e = 1; e <= m2_; ++e) core(e);
        poll();
    }

    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        ByteReader r(body);
        uint16_t elem = r.u16();
        uint16_t round = r.u16();
        uint8_t val = r.u8();
        if (val > 1 || elem < 1) return;
        if (m2_ > 0 && elem > m2_) return;
        ConsensusCore* c = core(elem);
        switch (subkind) {
            case CnBval: c->on_bval(from, round, val); break;
            case CnAux: c->on_aux(from, round, val); break;
            case CnDecide: c->on_decide(from, val); break;
            default: break;
        }
        poll();
    }

    void poll() override {
        if (!observer_ || completed_) return;
        std::set<int> u = observer_();
        for (int e : u) {
            if (e < 1 || e > m2_) continue;
            if (!joined_.count(e)) {
                joined_.insert(e);
                core(e)->set_input(1);
            }
        }
        if (!zero_phase_ && ones_ >= m1_) {
            zero_phase_ = true;
            for (int e = 1; e <= m2_; ++e)
                if (!joined_.count(e)) {
                    joined_.insert(e);
                    core(e)->set_input(0);
                }
        }
        if (static_cast<int>(decided_.size()) == m2_ && !completed_) {
            std::set<int> u2 = observer_();
            for (auto& [e, v] : decided_)
                if (v == 1 && !u2.count(e)) return;  // wait until core is inside local set
            completed_ = true;
            Completion c;
            for (auto& [e, v] : decided_)
                if (v == 1) c.elems.push_back(e);
            ctx.complete(std::move(c));
        }
    }

  private:
    ConsensusCore* core(int elem) {
        auto it = cores_.find(elem);
        if (it == cores_.end()) {
            auto ptr = std::make_unique<ConsensusCore>(
                ctx.n, ctx.t,
                [this, elem](uint8_t sub, uint16_t round, uint8_t val) {
                    ctx.send_all(sub, cons_body(static_cast<uint16_t>(elem), round, val));
                },
                [this, elem](int round) { return ctx.coin(elem, round); },
                [this, elem](int v) {
                    decided_[elem] = v;
                    if (v == 1) ++ones_;
                    poll();
                });
            it = cores_.emplace(elem, std::move(ptr)).first;
        }
        return it->second.get();
    }

    int m1_ = 0, m2_ = 0;
    std::function<std::set<int>()> observer_;
    std::map<int, std::unique_ptr<ConsensusCore>> cores_;
    std::set<int> joined_;
    std::map<int, int> decided_;
    int ones_ = 0;
    bool zero_phase_ = false, completed_ = false;
};

// ---------------------------------------------------------------------------
// Public/directed reconstruction of shared values.

using sub::OpShare;

class OpenMachine final : public Instance {
  public:
    void expect(int comp, int degree, int agree) {
        auto& slot = comps_[comp];
        if (slot.configured) return;
        slot.configured = true;
        slot.decoder = RobustDecoder(degree, ctx.t, agree, ctx.p);
        for (auto& [from, val] : slot.buffer) feed(comp, from, val);
        slot.buffer.clear();
    }

    void contribute(int comp, Fp share, int degree, int agree) {
        expect(comp, degree, agree);
        ByteWriter w;
        w.u16(static_cast<uint16_t>(comp));
        w.u32(share.v);
        ctx.send_all(OpShare, w.take());
    }

    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        if (subkind != OpShare) return;
        ByteReader r(body);
        int comp = r.u16();
        Fp val(r.u32(), ctx.p);
        auto& slot = comps_[comp];
        if (!slot.configured) {
            slot.buffer.emplace_back(from, val);
            return;
        }
        feed(comp, from, val);
    }

  private:
    struct Slot {
        bool configured = false;
        bool done = false;
        RobustDecoder decoder;
        std::vector<std::pair<AgentId, Fp>> buffer;
    };

    void feed(int comp, AgentId from, Fp val) {
        auto& slot = comps_[comp];
        if (slot.done) return;
        if (slot.decoder.add(from, val)) {
            slot.done = true;
            Completion c;
            c.slot = comp;
            c.values = {slot.decoder.secret()};
            ctx.complete(std::move(c));
        }
    }

    std::map<int, Slot> comps_;
};

// ---------------------------------------------------------------------------
// Shared circuit evaluation. Linear gates are local; each interactive
// multiplication opens W = A*B + x^t*U + R robustly (degree 2t) and takes
// e - R as the degree-t product sharing, with (R, U) drawn from the
// instance's mask family. Output completion is Ready-gated.

using sub::CcOpen; using sub::CcReady;

class CcMachine final : public Instance {
  public:
    void configure(const Circuit* circuit, std::vector<Fp> inputs,
                   std::function<std::pair<Fp, Fp>(int)> mask) {
        circuit_ = circuit;
        inputs_ = std::move(inputs);
        mask_ = std::move(mask);
        values_.assign(circuit_->gates().size(), std::nullopt);
        int muls = circuit_->interactive_muls();
        decoders_.assign(static_cast<std::size_t>(muls),
                         RobustDecoder(2 * ctx.t, ctx.t, 3 * ctx.t + 1, ctx.p));
        opened_.assign(static_cast<std::size_t>(muls), std::nullopt);
        open_started_.assign(static_cast<std::size_t>(muls), false);
        for (auto& [from, pair] : buffer_) feed(from, pair.first, pair.second);
        buffer_.clear();
        step();
    }

    void on_message(AgentId from, uint8_t subkind, const std::string& body) override {
        try {
            if (subkind == CcOpen) {
                ByteReader r(body);
                int seq = r.u16();
                Fp val(r.u32(), ctx.p);
                if (!circuit_) {
                    buffer_.emplace_back(from, std::make_pair(seq, val));
                    return;
                }
                feed(from, seq, val);
            } else if (subkind == CcReady) {
                if (ready_from_.insert(from).second) try_complete();
            }
        } catch (const Error&) {
        }
    }

  private:
    void feed(AgentId from, int seq, Fp val) {
        if (seq < 0 || seq >= static_cast<int>(decoders_.size())) return;
        if (decoders_[static_cast<std::size_t>(seq)].add(from, val)) {
            opened_[static_cast<std::size_t>(seq)] =
                decoders_[static_cast<std::size_t>(seq)].secret();
            step();
        }
    }

    void step() {
        if (!circuit_) return;
        const auto& gates = circuit_->gates();
        const uint32_t p = ctx.p;
        bool progress = true;
        while (progress) {
            progress = false;
            int mulseq = 0;
            for (std::size_t g = 0; g < gates.size(); ++g) {
                const auto& gate = gates[g];
                bool interactive =
                    gate.op == Circuit::Op::Mul &&
                    gates[static_cast<std::size_t>(gate.a)].op != Circuit::Op::Const &&
                    gates[static_cast<std::size_t>(gate.b)].op != Circuit::Op::Const;
                int myseq = interactive ? mulseq++ : -1;
                if (values_[g]) continue;
                switch (gate.op) {
                    case Circuit::Op::In: {
                        std::size_t k = static_cast<std::size_t>(gate.a);
                        if (k < inputs_.size()) {
                            values_[g] = inputs_[k];
                            progress = true;
                        }
                        break;
                    }
                    case Circuit::Op::Const:
                        values_[g] = Fp(gate.cval, p);
                        progress = true;
                        break;
                    case Circuit::Op::Add: {
                        auto& a = values_[static_cast<std::size_t>(gate.a)];
                        auto& b = values_[static_cast<std::size_t>(gate.b)];
                        if (a && b) {
                            values_[g] = *a + *b;
                            progress = true;
                        }
                        break;
                    }
                    case Circuit::Op::Mul: {
                        auto& a = values_[static_cast<std::size_t>(gate.a)];
                        auto& b = values_[static_cast<std::size_t>(gate.b)];
                        if (!a || !b) break;
                        if (!interactive) {
                            values_[g] = *a * *b;
                            progress = true;
                            break;
                        }
                        std::size_t s = static_cast<std::size_t>(myseq);
                        if (opened_[s]) {
                            auto [r_share, u_share] = mask_(myseq);
                            values_[g] = *opened_[s] - r_share;
                            progress = true;
                        } else if (!open_started_[s]) {
                            open_started_[s] = true;
                            auto [r_share, u_share] = mask_(myseq);
                            // x^t * U re-randomizes the opened share vector and
                            // vanishes at 0; at t=0 there is no room (or need)
                            // for it.
                            Fp w = *a * *b + r_share;
                            if (ctx.t > 0)
                                w = w + Fp(ctx.self, p).pow(static_cast<uint64_t>(ctx.t)) * u_share;
                            ByteWriter bw;
                            bw.u16(static_cast<uint16_t>(myseq));
                            bw.u32(w.v);
                            ctx.send_all(CcOpen, bw.take());
                        }
                        break;
                    }
                    case Circuit::Op::Out: {
                        auto& a = values_[static_cast<std::size_t>(gate.a)];
                        if (a) {
                            values_[g] = *a;
                            progress = true;
                        }
                        break;
                    }
                }
            }
        }
        // all outputs done?
        bool outs_done = true;
        for (int o : circuit_->outputs())
            if (!values_[static_cast<std::size_t>(o)]) outs_done = false;
        if (outs_done && !ready_sent_) {
            ready_sent_ = true;
            ctx.note("cc_share_done", "");
            ctx.send_all(CcReady, "");
        }
        try_complete();
    }

    void try_complete() {
        if (completed_ || !ready_sent_) return;
        if (static_cast<int>(ready_from_.size()) < ctx.n - ctx.t) return;
        completed_ = true;
        Completion c;
        for (int o : circuit_->outputs()) c.values.push_back(*values_[static_cast<std::size_t>(o)]);
        ctx.complete(std::move(c));
    }

    const Circuit* circuit_ = nullptr;
    std::vector<Fp> inputs_;
    std::function<std::pair<Fp, Fp>(int)> mask_;
    std::vector<std::optional<Fp>> values_;
    std::vector<RobustDecoder> decoders_;
    std::vector<std::optional<Fp>> opened_;
    std::vector<bool> open_started_;
    std::vector<std::pair<AgentId, std::pair<int, Fp>>> buffer_;
    std::set<AgentId> ready_from_;
    bool ready_sent_ = false, completed_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// Hub

Hub::Hub(const AgentContext& actx, int t, uint32_t p) : actx_(actx), t_(t), p_(p) {
    if (!is_prime(p)) throw ConfigError("hub: modulus must be prime");
}

Instance* Hub::get_or_create(const InstanceLabel& label, bool allow_create) {
    auto it = instances_.find(label);
    if (it != instances_.end()) return it->second.get();
    if (!allow_create) return nullptr;
    std::unique_ptr<Instance> inst;
    switch (label.kind) {
        case Kind::Bcast: {
            auto m = std::make_unique<BcastMachine>();
            inst = std::move(m);
            break;
        }
        case Kind::Cons: {
            auto m = std::make_unique<ConsMachine>();
            inst = std::move(m);
            break;
        }
        case Kind::Vss: {
            inst = std::make_unique<VssMachine>();
            break;
        }
        case Kind::Open: {
            inst = std::make_unique<OpenMachine>();
            break;
        }
        default:
            return nullptr;  // ACS and CC wait for an application start
    }
    inst->ctx = InstanceCtx{this, label, actx_.n, t_, p_, actx_.id};
    Instance* raw = inst.get();
    if (label.kind == Kind::Bcast) static_cast<BcastMachine*>(raw)->wire();
    if (label.kind == Kind::Cons) static_cast<ConsMachine*>(raw)->wire();
    instances_.emplace(label, std::move(inst));
    return raw;
}

Instance* Hub::ensure_started(const InstanceLabel& label, std::unique_ptr<Instance> inst) {
    inst->ctx = InstanceCtx{this, label, actx_.n, t_, p_, actx_.id};
    Instance* raw = inst.get();
    instances_.emplace(label, std::move(inst));
    auto st = stash_.find(label);
    if (st != stash_.end()) {
        for (auto& [from, subkind, body] : st->second)
            queue_.emplace_back(label, from, subkind, body);
        stash_.erase(st);
    }
    return raw;
}

void Hub::enqueue_local(const InstanceLabel& label, uint8_t subkind, const std::string& body) {
    queue_.emplace_back(label, actx_.id, subkind, body);
    if (!processing_) drain_queue();
}

void Hub::record(Completion c) {
    if (actx_.recorder)
        actx_.recorder->log(actx_.id, "complete", c.label.str() + "#" + std::to_string(c.slot),
                            std::to_string(c.tag));
    results_[{c.label, c.slot}] = c;
    completions_.push_back(std::move(c));
}

void Hub::start_vss(const InstanceLabel& label, const std::vector<Fp>& secrets) {
    auto* inst = get_or_create(label, true);
    static_cast<VssMachine*>(inst)->deal(secrets);
    drain_queue();
}

void Hub::start_broadcast(const InstanceLabel& label, const std::string& payload) {
    auto* inst = get_or_create(label, true);
    static_cast<BcastMachine*>(inst)->start(payload);
    drain_queue();
}

void Hub::start_consensus(const InstanceLabel& label, int input) {
    auto* inst = get_or_create(label, true);
    static_cast<ConsMachine*>(inst)->set_input(input);
    drain_queue();
}

void Hub::start_acs(const InstanceLabel& label, int m1, int m2,
                    std::function<std::set<int>()> observer) {
    auto it = instances_.find(label);
    AcsMachine* m;
    if (it == instances_.end()) {
        auto inst = std::make_unique<AcsMachine>();
        m = inst.get();
        ensure_started(label, std::move(inst));
    } else {
        m = static_cast<AcsMachine*>(it->second.get());
    }
    m->configure(m1, m2, std::move(observer));
    drain_queue();
}

void Hub::open_contribute(const InstanceLabel& label, int comp, Fp share, int degree, int agree) {
    auto* inst = get_or_create(label, true);
    static_cast<OpenMachine*>(inst)->contribute(comp, share, degree, agree);
    drain_queue();
}

void Hub::directed_open_expect(const InstanceLabel& label, int comp, int degree, int agree) {
    auto* inst = get_or_create(label, true);
    static_cast<OpenMachine*>(inst)->expect(comp, degree, agree);
    drain_queue();
}

void Hub::send_open_share(const InstanceLabel& label, AgentId to, int comp, Fp share) {
    ByteWriter w;
    w.u16(static_cast<uint16_t>(comp));
    w.u32(share.v);
    if (to == actx_.id) {
        enqueue_local(label, OpShare, w.str());
        return;
    }
    out_.push_back(send_to(to, encode_wire(WireMsg{label, OpShare, w.take()})));
}

void Hub::start_cc(const InstanceLabel& label, const Circuit* circuit, std::vector<Fp> inputs,
                   std::function<std::pair<Fp, Fp>(int)> mask_for_mul) {
    auto it = instances_.find(label);
    CcMachine* m;
    if (it == instances_.end()) {
        auto inst = std::make_unique<CcMachine>();
        m = inst.get();
        ensure_started(label, std::move(inst));
    } else {
        m = static_cast<CcMachine*>(it->second.get());
    }
    m->configure(circuit, std::move(inputs), std::move(mask_for_mul));
    drain_queue();
}

void Hub::on_turn(const std::vector<ReceivedMsg>& msgs) {
    // Group by label, labels in lexicographic order, arrival order within.
    std::vector<std::pair<InstanceLabel, std::tuple<AgentId, uint8_t, std::string>>> decoded;
    decoded.reserve(msgs.size());
    for (const auto& m : msgs) {
        auto wm = decode_wire(m.payload);
        if (!wm) continue;
        decoded.emplace_back(wm->label, std::make_tuple(m.from, wm->subkind, std::move(wm->body)));
    }
    std::stable_sort(decoded.begin(), decoded.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [label, rest] : decoded)
        queue_.emplace_back(label, std::get<0>(rest), std::get<1>(rest), std::move(std::get<2>(rest)));
    drain_queue();
}

void Hub::drain_queue() {
    if (processing_) return;
    processing_ = true;
    for (;;) {
        if (queue_.empty()) {
            // poll phase; polls may enqueue more work
            std::vector<Instance*> machines;
            machines.reserve(instances_.size());
            for (auto& [label, inst] : instances_) machines.push_back(inst.get());
            for (Instance* m : machines) m->poll();
            if (queue_.empty()) break;
        }
        auto [label, from, subkind, body] = std::move(queue_.front());
        queue_.pop_front();
        Instance* inst = get_or_create(label, true);
        if (!inst) {
            stash_[label].emplace_back(from, subkind, std::move(body));
            continue;
        }
        inst->on_message(from, subkind, body);
    }
    processing_ = false;
}

std::vector<TurnAction> Hub::drain_actions() { return std::move(out_); }

}  // namespace medsim
