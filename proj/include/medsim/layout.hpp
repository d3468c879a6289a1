#pragma once

#include <string>
#include <vector>

#include "medsim/errors.hpp"
#include "medsim/field.hpp"

namespace medsim {

// Fixed-width encoding of a mediator's local history as a vector of field
// elements: slot 0 counts recorded turns; each turn block holds the received
// messages (sender, symbol), the sent messages (recipient, symbol), and the
// transducer state after the turn as a one-hot group. Zero-padded slots are
// inert by construction (symbol 0 is the identity transition, recipient 0
// means "no message"), which keeps every circuit position static.
struct HistoryLayout {
    int n = 0;           // agents
    int turns = 0;       // K: maximum recorded turns
    int max_recv = 0;    // received messages per turn block
    int max_send = 0;    // sent-message slots per turn block
    int states = 0;      // transducer state count (one-hot group per turn)

    int block_width() const { return 1 + 2 * max_recv + 2 * max_send + states; }
    int width() const { return 1 + turns * block_width(); }

    int slot_turn_count() const { return 0; }
    int block_base(int k) const {  // k is 1-based
        if (k < 1 || k > turns) throw EncodingOverflow("turn beyond layout bound");
        return 1 + (k - 1) * block_width();
    }
    int slot_rc(int k) const { return block_base(k); }
    int slot_rec_sender(int k, int r) const { return block_base(k) + 1 + 2 * r; }
    int slot_rec_sym(int k, int r) const { return block_base(k) + 2 + 2 * r; }
    int slot_snd_rcpt(int k, int l) const { return block_base(k) + 1 + 2 * max_recv + 2 * l; }
    int slot_snd_sym(int k, int l) const { return block_base(k) + 2 + 2 * max_recv + 2 * l; }
    int slot_state(int k, int s) const {
        return block_base(k) + 1 + 2 * max_recv + 2 * max_send + s;
    }
};

struct PlainTurn {
    std::vector<std::pair<int, int>> recs;   // (sender, symbol)
    std::vector<std::pair<int, int>> sends;  // (recipient, symbol), holes removed
};

struct PlainHistory {
    std::vector<PlainTurn> turns;
    bool prefix_of(const PlainHistory& other) const;
};

PlainHistory decode_history(const HistoryLayout& lay, const std::vector<Fp>& enc, int upto_turn);

}  // namespace medsim
