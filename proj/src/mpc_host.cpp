#include "medsim/mpc_host.hpp"

#include <algorithm>

namespace medsim {

void MaskPool::start(RandomSource& rng) {
    const uint32_t p = hub_->p();
    std::vector<Fp> batch;
    batch.reserve(static_cast<std::size_t>(2 * muls_ + zeros_) + 1);
    for (int i = 0; i < 2 * muls_; ++i) batch.emplace_back(rng.below(p), p);
    for (int z = 0; z < zeros_; ++z) batch.emplace_back(0, p);
    if (batch.empty()) batch.emplace_back(0, p);  // mul-free circuits still share one slot
    hub_->start_vss(vss_label(hub_->self()), batch);
    Hub* h = hub_;
    int n = h->n();
    auto vss = [this](int j) { return vss_label(j); };
    hub_->start_acs(acs_label(), h->n() - h->t(), h->n(), [h, n, vss] {
        std::set<int> u;
        for (int j = 1; j <= n; ++j)
            if (h->has_result(vss(j))) u.insert(j);
        return u;
    });
}

bool MaskPool::ready() const {
    if (!hub_->has_result(acs_label())) return false;
    for (int j : hub_->result(acs_label()).elems)
        if (!hub_->has_result(vss_label(j))) return false;
    return true;
}

std::vector<int> MaskPool::core() const { return hub_->result(acs_label()).elems; }

std::pair<Fp, Fp> MaskPool::mask(int seq) const {
    const uint32_t p = hub_->p();
    Fp r(0, p), u(0, p);
    for (int j : hub_->result(acs_label()).elems) {
        const auto& batch = hub_->result(vss_label(j)).values;
        r = r + batch.at(static_cast<std::size_t>(2 * seq));
        u = u + batch.at(static_cast<std::size_t>(2 * seq + 1));
    }
    return {r, u};
}

Fp MaskPool::zero_share(int z, int core_member) const {
    const auto& batch = hub_->result(vss_label(core_member)).values;
    return batch.at(static_cast<std::size_t>(2 * muls_ + z));
}

Circuit randomize_output(const Circuit& c, int zero_inputs, uint32_t p) {
    if (c.outputs().size() != 1) throw ConfigError("randomize_output: single output required");
    Circuit out;
    // replicate gates, remembering the wire the single Out gate reads
    std::vector<int> remap(c.gates().size());
    int out_src = -1;
    for (std::size_t g = 0; g < c.gates().size(); ++g) {
        const auto& gate = c.gates()[g];
        switch (gate.op) {
            case Circuit::Op::In: remap[g] = out.in(gate.a); break;
            case Circuit::Op::Add:
                remap[g] = out.add(remap[static_cast<std::size_t>(gate.a)],
                                   remap[static_cast<std::size_t>(gate.b)]);
                break;
            case Circuit::Op::Mul:
                remap[g] = out.mul(remap[static_cast<std::size_t>(gate.a)],
                                   remap[static_cast<std::size_t>(gate.b)]);
                break;
            case Circuit::Op::Const: remap[g] = out.konst(gate.cval); break;
            case Circuit::Op::Out: out_src = remap[static_cast<std::size_t>(gate.a)]; break;
        }
    }
    int base = c.num_inputs();
    int prod = -1;
    for (int z = 0; z < zero_inputs; ++z) {
        int w = out.in(base + z);
        prod = prod < 0 ? w : out.mul(prod, w);
    }
    if (prod >= 0) out_src = out.add(out_src, prod);
    (void)p;
    out.out(out_src);
    return out;
}

// ---------------------------------------------------------------------------

namespace {
constexpr uint16_t kInputIdx = 1, kMaskIdx = 2;
const InstanceLabel kInputAcs{Kind::Acs, 0, kInputIdx, 0};
const InstanceLabel kCcLabel{Kind::Cc, 0, 1, 0};
const InstanceLabel kOutOpen{Kind::Open, 0, 1, 0};
}  // namespace

CircuitEvalAgent::CircuitEvalAgent(int t, uint32_t p, Config cfg)
    : HubAgent(t, p), cfg_(std::move(cfg)) {
    if (!cfg_.format)
        cfg_.format = [](const std::vector<Fp>& vals, const std::vector<int>& core) {
            std::string s;
            for (std::size_t i = 0; i < core.size(); ++i)
                s += (i ? "," : "") + std::to_string(core[i]);
            s += "|";
            for (std::size_t i = 0; i < vals.size(); ++i)
                s += (i ? "," : "") + std::to_string(vals[i].v);
            return s;
        };
    if (!cfg_.input_value)
        cfg_.input_value = [](const AgentContext& ctx, RandomSource&) {
            uint32_t v = 0;
            try {
                v = static_cast<uint32_t>(std::stoul(ctx.input));
            } catch (...) {
            }
            return Fp(v, 97);
        };
}

void CircuitEvalAgent::first_turn() {
    Fp x = cfg_.input_value(ctx_, *ctx_.rng);
    hub().start_vss({Kind::Vss, static_cast<uint8_t>(ctx_.id), kInputIdx, 0}, {Fp(x.v, p_)});
    int muls = cfg_.f->interactive_muls() + (cfg_.wrap ? ctx_.n : 0);
    pool_.emplace(&hub(), kMaskIdx, 0, muls, cfg_.wrap ? 1 : 0);
    pool_->start(*ctx_.rng);
    Hub* h = &hub();
    int n = ctx_.n;
    hub().start_acs(kInputAcs, n - t_, n, [h, n] {
        std::set<int> u;
        for (int j = 1; j <= n; ++j)
            if (h->has_result({Kind::Vss, static_cast<uint8_t>(j), kInputIdx, 0})) u.insert(j);
        return u;
    });
}

void CircuitEvalAgent::process() {
    auto& q = hub().completions();
    while (!q.empty()) {
        Completion c = std::move(q.front());
        q.pop_front();
        if (c.label == kInputAcs) {
            input_core_ = c.elems;
            core_known_ = true;
        } else if (c.label == kCcLabel) {
            opened_.assign(c.values.size(), std::nullopt);
            for (std::size_t i = 0; i < c.values.size(); ++i) {
                if (ctx_.recorder)
                    ctx_.recorder->log(ctx_.id, "cc_output_share", std::to_string(i),
                                       std::to_string(c.values[i].v));
                hub().open_contribute(kOutOpen, static_cast<int>(i), c.values[i], t_, 2 * t_ + 1);
            }
            opens_started_ = true;
        } else if (c.label == kOutOpen && opens_started_) {
            opened_.at(static_cast<std::size_t>(c.slot)) = c.values.at(0);
        }
    }
    if (core_known_ && !cc_started_ && pool_->ready()) {
        cc_started_ = true;
        std::vector<Fp> inputs;
        for (int k = 0; k < cfg_.f->num_inputs(); ++k) {
            int agent = k + 1;
            bool in_core =
                std::find(input_core_.begin(), input_core_.end(), agent) != input_core_.end();
            if (in_core && agent <= ctx_.n) {
                inputs.push_back(
                    hub().result({Kind::Vss, static_cast<uint8_t>(agent), kInputIdx, 0})
                        .values.at(0));
            } else {
                inputs.emplace_back(0, p_);
            }
        }
        const Circuit* target = cfg_.f;
        if (cfg_.wrap) {
            auto zc = pool_->core();
            compiled_ = randomize_output(*cfg_.f, static_cast<int>(zc.size()), p_);
            for (int j : zc) inputs.push_back(pool_->zero_share(0, j));
            target = &*compiled_;
        }
        MaskPool* pool = &*pool_;
        hub().start_cc(kCcLabel, target, std::move(inputs),
                       [pool](int seq) { return pool->mask(seq); });
    }
    if (opens_started_ && !halted()) {
        bool all = !opened_.empty();
        for (auto& o : opened_)
            if (!o) all = false;
        if (all) {
            std::vector<Fp> vals;
            for (auto& o : opened_) vals.push_back(*o);
            on_result(vals, input_core_);
        }
    }
}

void CircuitEvalAgent::on_result(const std::vector<Fp>& opened, const std::vector<int>& core) {
    out_value(cfg_.format(opened, core));
    halt();
}

// ---------------------------------------------------------------------------

RandomBitAgent::RandomBitAgent(int t, uint32_t p, std::optional<uint32_t> force_value)
    : HubAgent(t, p), force_(force_value) {}

namespace {
const InstanceLabel kBitAcs{Kind::Acs, 0, 1, 0};
const InstanceLabel kXorCc{Kind::Cc, 0, 100, 0};
const InstanceLabel kBitOpen{Kind::Open, 0, 100, 0};
InstanceLabel bit_vss(int j) { return {Kind::Vss, static_cast<uint8_t>(j), 1, 0}; }
InstanceLabel check_cc(int j) { return {Kind::Cc, 0, static_cast<uint16_t>(j), 0}; }
InstanceLabel check_open(int j) { return {Kind::Open, 0, static_cast<uint16_t>(j), 0}; }
}  // namespace

void RandomBitAgent::first_turn() {
    uint32_t b = force_ ? *force_ : static_cast<uint32_t>(ctx_.rng->below(2));
    hub().start_vss(bit_vss(ctx_.id), {Fp(b, p_)});
    pool_.emplace(&hub(), 2, 0, ctx_.n + ctx_.n, 0);
    pool_->start(*ctx_.rng);
    Hub* h = &hub();
    int n = ctx_.n;
    std::set<int>* valid = &valid_;
    hub().start_acs(kBitAcs, t_ + 1, n, [valid] { return *valid; });
    (void)h;
}

void RandomBitAgent::process() {
    auto& q = hub().completions();
    while (!q.empty()) {
        Completion c = std::move(q.front());
        q.pop_front();
        if (c.label.kind == Kind::Open && c.label.index >= 1 &&
            c.label.index <= static_cast<uint16_t>(ctx_.n) && c.label != kBitOpen) {
            if (c.values.at(0).zero()) valid_.insert(c.label.index);
        } else if (c.label == kBitAcs) {
            core_ = c.elems;
            core_known_ = true;
        } else if (c.label.kind == Kind::Cc && c.label != kXorCc) {
            hub().open_contribute(check_open(c.label.index), 0, c.values.at(0), t_, 2 * t_ + 1);
        } else if (c.label == kXorCc) {
            hub().open_contribute(kBitOpen, 0, c.values.at(0), t_, 2 * t_ + 1);
            open_started_ = true;
        } else if (c.label == kBitOpen) {
            out_value(std::to_string(c.values.at(0).v));
            halt();
        }
    }
    if (!pool_ || !pool_->ready()) return;
    // start the squaring check b*b - b for every completed contribution
    for (int j = 1; j <= ctx_.n; ++j) {
        if (checks_started_.count(j) || !hub().has_result(bit_vss(j))) continue;
        checks_started_.insert(j);
        auto [it, fresh] = check_circuits_.try_emplace(j);
        if (fresh) {
            Circuit& cc = it->second;
            int x = cc.in(0);
            int sq = cc.mul(x, x);
            cc.out(cc.csub(sq, x, p_));
        }
        MaskPool* pool = &*pool_;
        int off = j - 1;
        hub().start_cc(check_cc(j), &it->second,
                       {hub().result(bit_vss(j)).values.at(0)},
                       [pool, off](int seq) { return pool->mask(off + seq); });
    }
    if (core_known_ && !xor_started_) {
        xor_started_ = true;
        xor_circuit_.emplace();
        Circuit& cc = *xor_circuit_;
        int acc = cc.in(0);
        for (std::size_t i = 1; i < core_.size(); ++i) {
            int x = cc.in(static_cast<int>(i));
            // a xor b = a + b - 2ab
            int prod = cc.mul(acc, x);
            acc = cc.add(cc.add(acc, x), cc.cmul(prod, p_ - 2));
        }
        cc.out(acc);
        std::vector<Fp> inputs;
        for (int j : core_) inputs.push_back(hub().result(bit_vss(j)).values.at(0));
        MaskPool* pool = &*pool_;
        int n = ctx_.n;
        hub().start_cc(kXorCc, &*xor_circuit_, std::move(inputs),
                       [pool, n](int seq) { return pool->mask(n + seq); });
    }
}

}  // namespace medsim
