#include "medsim/layout.hpp"

namespace medsim {

bool PlainHistory::prefix_of(const PlainHistory& other) const {
    if (turns.size() > other.turns.size()) return false;
    for (std::size_t k = 0; k < turns.size(); ++k) {
        if (turns[k].recs != other.turns[k].recs) return false;
        if (turns[k].sends != other.turns[k].sends) return false;
    }
    return true;
}

PlainHistory decode_history(const HistoryLayout& lay, const std::vector<Fp>& enc, int upto_turn) {
    PlainHistory h;
    if (enc.size() < static_cast<std::size_t>(lay.width()))
        throw EncodingOverflow("encoded history shorter than layout");
    for (int k = 1; k <= upto_turn; ++k) {
        PlainTurn turn;
        int rc = static_cast<int>(enc[static_cast<std::size_t>(lay.slot_rc(k))].v);
        for (int r = 0; r < std::min(rc, lay.max_recv); ++r) {
            int sender = static_cast<int>(enc[static_cast<std::size_t>(lay.slot_rec_sender(k, r))].v);
            int sym = static_cast<int>(enc[static_cast<std::size_t>(lay.slot_rec_sym(k, r))].v);
            turn.recs.emplace_back(sender, sym);
        }
        for (int l = 0; l < lay.max_send; ++l) {
            int rcpt = static_cast<int>(enc[static_cast<std::size_t>(lay.slot_snd_rcpt(k, l))].v);
            int sym = static_cast<int>(enc[static_cast<std::size_t>(lay.slot_snd_sym(k, l))].v);
            if (rcpt != 0) turn.sends.emplace_back(rcpt, sym);
        }
        h.turns.push_back(std::move(turn));
    }
    return h;
}

}  // namespace medsim
