#include "medsim/catalog.hpp"

#include "medsim/bytes.hpp"

namespace medsim {

std::vector<TurnAction> BadVssDealer::on_scheduled(const std::vector<ReceivedMsg>&) {
    std::vector<TurnAction> acts;
    if (sent_) return acts;
    sent_ = true;
    auto sample = [&](uint32_t bump) {
        std::vector<std::vector<Fp>> F(static_cast<std::size_t>(t_) + 1,
                                       std::vector<Fp>(static_cast<std::size_t>(t_) + 1));
        for (auto& row : F)
            for (auto& cell : row) cell = Fp(ctx_.rng->below(p_) + bump, p_);
        return F;
    };
    auto Fa = sample(0), Fb = sample(1);
    for (int i = 1; i <= ctx_.n; ++i) {
        ByteWriter w;
        w.u16(1);
        if (mode_ == Mode::Garbage) {
            for (int k = 0; k < 2 * (t_ + 1); ++k)
                w.u32(static_cast<uint32_t>(ctx_.rng->below(p_)));
        } else {
            const auto& F = i <= ctx_.n / 2 ? Fa : Fb;
            for (int a2 = 0; a2 <= t_; ++a2) {
                Fp c(0, p_);
                Fp xi(1, p_);
                for (int a1 = 0; a1 <= t_; ++a1) {
                    c = c + F[static_cast<std::size_t>(a1)][static_cast<std::size_t>(a2)] * xi;
                    xi = xi * Fp(i, p_);
                }
                w.u32(c.v);
            }
            for (int a1 = 0; a1 <= t_; ++a1) {
                Fp c(0, p_);
                Fp yi(1, p_);
                for (int a2 = 0; a2 <= t_; ++a2) {
                    c = c + F[static_cast<std::size_t>(a1)][static_cast<std::size_t>(a2)] * yi;
                    yi = yi * Fp(i, p_);
                }
                w.u32(c.v);
            }
        }
        acts.push_back(send_to(i, encode_wire(WireMsg{label_, sub::VsRowCol, w.take()})));
    }
    return acts;
}

std::vector<TurnAction> CorruptingAgent::on_scheduled(const std::vector<ReceivedMsg>& msgs) {
    auto acts = inner_->on_scheduled(msgs);
    for (TurnAction& a : acts) {
        if (a.kind != TurnAction::Kind::Snd) continue;
        auto wm = decode_wire(a.payload);
        if (!wm) continue;
        bool is_cc_open = wm->label.kind == Kind::Cc && wm->subkind == sub::CcOpen;
        bool is_open = wm->label.kind == Kind::Open && wm->subkind == sub::OpShare;
        if (!is_cc_open && !is_open) continue;
        try {
            ByteReader r(wm->body);
            uint16_t comp = r.u16();
            uint32_t val = r.u32();
            ByteWriter w;
            w.u16(comp);
            w.u32(val + 1);
            wm->body = w.take();
            a.payload = encode_wire(*wm);
        } catch (const Error&) {
        }
    }
    return acts;
}

}  // namespace medsim
