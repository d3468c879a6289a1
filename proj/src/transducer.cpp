#include "medsim/transducer.hpp"

#include <algorithm>
#include <map>

namespace medsim {

int MediatorSpec::sym_code(const std::string& s) const {
    for (std::size_t i = 1; i < alphabet.size(); ++i)
        if (alphabet[i] == s) return static_cast<int>(i);
    return 0;
}

const std::string& MediatorSpec::sym_str(int code) const {
    static const std::string unknown = "?";
    if (code < 1 || code >= static_cast<int>(alphabet.size())) return unknown;
    return alphabet[static_cast<std::size_t>(code)];
}

HistoryLayout MediatorSpec::layout(uint32_t p) const {
    int states = layout_states >= 0 ? layout_states : machine->num_states();
    if (alphabet.size() + static_cast<std::size_t>(machine->num_states()) +
            static_cast<std::size_t>(n) >=
        static_cast<std::size_t>(p))
        throw ConfigError("modulus too small for alphabet, states and agents");
    HistoryLayout lay;
    lay.n = n;
    lay.max_recv = std::max(1, n * per_agent_bound);
    lay.turns = n * per_agent_bound + 1;
    lay.max_send = max_sends_per_turn;
    lay.states = states;
    return lay;
}

namespace {

std::vector<Transducer::Emission> expand(const std::vector<Transducer::Emission>& ems, int n) {
    std::vector<Transducer::Emission> out;
    for (const auto& e : ems) {
        if (e.to == Transducer::Emission::kBroadcast) {
            for (int j = 1; j <= n; ++j) out.push_back({j, e.sym});
        } else {
            out.push_back(e);
        }
    }
    return out;
}

int table_send_bound(const TableTransducer& t, int n, int max_recv) {
    int em_bot = 0, em_rec = 0;
    for (int s = 0; s < t.num_states(); ++s) {
        em_bot = std::max(em_bot, static_cast<int>(expand(t.bot_entry(s).emissions, n).size()));
        for (int a = 1; a <= t.alphabet(); ++a)
            em_rec = std::max(em_rec, static_cast<int>(expand(t.entry(s, a).emissions, n).size()));
    }
    return em_bot + max_recv * em_rec;
}

}  // namespace

std::function<Circuit(const HistoryLayout&, int, const std::vector<std::vector<int>>&, uint32_t)>
table_step_builder(std::shared_ptr<TableTransducer> t) {
    return [t](const HistoryLayout& lay, int k, const std::vector<std::vector<int>>&, uint32_t p) {
        const int n = lay.n;
        const int S = t->num_states();
        const int A = t->alphabet();
        Circuit c;
        std::vector<int> in(static_cast<std::size_t>(lay.width()));
        for (int i = 0; i < lay.width(); ++i) in[static_cast<std::size_t>(i)] = c.in(i);

        std::vector<int> state(static_cast<std::size_t>(S));
        if (k == 1) {
            for (int s = 0; s < S; ++s)
                state[static_cast<std::size_t>(s)] = c.konst(s == t->initial_state() ? 1 : 0);
        } else {
            for (int s = 0; s < S; ++s)
                state[static_cast<std::size_t>(s)] =
                    in[static_cast<std::size_t>(lay.slot_state(k - 1, s))];
        }

        std::vector<std::pair<int, int>> sends;  // (rcpt wire, sym wire)

        if (k == 1) {
            int em_bot = 0;
            for (int s = 0; s < S; ++s)
                em_bot = std::max(em_bot,
                                  static_cast<int>(expand(t->bot_entry(s).emissions, n).size()));
            for (int e = 0; e < em_bot; ++e) {
                std::vector<std::pair<int, uint32_t>> rcpt_terms, sym_terms;
                for (int s = 0; s < S; ++s) {
                    auto ems = expand(t->bot_entry(s).emissions, n);
                    if (e >= static_cast<int>(ems.size())) continue;
                    const auto& em = ems[static_cast<std::size_t>(e)];
                    rcpt_terms.emplace_back(state[static_cast<std::size_t>(s)],
                                            static_cast<uint32_t>(em.to));
                    sym_terms.emplace_back(state[static_cast<std::size_t>(s)],
                                           static_cast<uint32_t>(em.sym));
                }
                sends.emplace_back(c.affine(rcpt_terms, 0, p), c.affine(sym_terms, 0, p));
            }
            std::vector<std::vector<std::pair<int, uint32_t>>> terms(static_cast<std::size_t>(S));
            for (int s = 0; s < S; ++s)
                terms[static_cast<std::size_t>(t->bot_entry(s).next_state)].emplace_back(
                    state[static_cast<std::size_t>(s)], 1);
            for (int s = 0; s < S; ++s)
                state[static_cast<std::size_t>(s)] =
                    c.affine(terms[static_cast<std::size_t>(s)], 0, p);
        }

        int em_rec = 0;
        for (int s = 0; s < S; ++s)
            for (int a = 1; a <= A; ++a)
                em_rec = std::max(em_rec,
                                  static_cast<int>(expand(t->entry(s, a).emissions, n).size()));

        for (int r = 0; r < lay.max_recv; ++r) {
            int sym = in[static_cast<std::size_t>(lay.slot_rec_sym(k, r))];
            auto delta = delta_basis(c, sym, A + 1, p);
            std::map<std::pair<int, int>, int> prod;
            auto P = [&](int s, int a) {
                auto key = std::make_pair(s, a);
                auto it = prod.find(key);
                if (it == prod.end())
                    it = prod
                             .emplace(key, c.mul(state[static_cast<std::size_t>(s)],
                                                 delta[static_cast<std::size_t>(a)]))
                             .first;
                return it->second;
            };
            for (int e = 0; e < em_rec; ++e) {
                std::vector<std::pair<int, uint32_t>> rcpt_terms, sym_terms;
                for (int s = 0; s < S; ++s)
                    for (int a = 1; a <= A; ++a) {
                        auto ems = expand(t->entry(s, a).emissions, n);
                        if (e >= static_cast<int>(ems.size())) continue;
                        const auto& em = ems[static_cast<std::size_t>(e)];
                        rcpt_terms.emplace_back(P(s, a), static_cast<uint32_t>(em.to));
                        sym_terms.emplace_back(P(s, a),
                                               em.sym == Transducer::Emission::kEchoSym
                                                   ? static_cast<uint32_t>(a)
                                                   : static_cast<uint32_t>(em.sym));
                    }
                sends.emplace_back(c.affine(rcpt_terms, 0, p), c.affine(sym_terms, 0, p));
            }
            std::vector<std::vector<std::pair<int, uint32_t>>> moves(static_cast<std::size_t>(S));
            for (int s = 0; s < S; ++s)
                for (int a = 1; a <= A; ++a) {
                    int ns = t->entry(s, a).next_state;
                    if (ns == s) continue;
                    int pr = P(s, a);
                    moves[static_cast<std::size_t>(s)].emplace_back(pr, p - 1);
                    moves[static_cast<std::size_t>(ns)].emplace_back(pr, 1);
                }
            for (int s = 0; s < S; ++s) {
                if (moves[static_cast<std::size_t>(s)].empty()) continue;
                auto terms = moves[static_cast<std::size_t>(s)];
                terms.emplace_back(state[static_cast<std::size_t>(s)], 1);
                state[static_cast<std::size_t>(s)] = c.affine(terms, 0, p);
            }
        }
        while (static_cast<int>(sends.size()) < lay.max_send)
            sends.emplace_back(c.konst(0), c.konst(0));

        for (int slot = 0; slot < lay.width(); ++slot) {
            if (slot == lay.slot_turn_count()) {
                c.out(c.affine({{in[static_cast<std::size_t>(slot)], 1}}, 1, p));
                continue;
            }
            bool written = false;
            for (int l = 0; l < lay.max_send && !written; ++l) {
                if (slot == lay.slot_snd_rcpt(k, l)) {
                    c.out(sends[static_cast<std::size_t>(l)].first);
                    written = true;
                } else if (slot == lay.slot_snd_sym(k, l)) {
                    c.out(sends[static_cast<std::size_t>(l)].second);
                    written = true;
                }
            }
            for (int s = 0; s < S && !written; ++s)
                if (slot == lay.slot_state(k, s)) {
                    c.out(state[static_cast<std::size_t>(s)]);
                    written = true;
                }
            if (!written) c.out(in[static_cast<std::size_t>(slot)]);
        }
        return c;
    };
}

PlainHistory transducer_run(const MediatorSpec& spec,
                            const std::vector<std::vector<std::pair<int, int>>>& recs_per_turn) {
    PlainHistory h;
    const Transducer& m = *spec.machine;
    const int n = spec.n;
    int state = m.initial_state();
    for (int k = 1; k <= static_cast<int>(recs_per_turn.size()); ++k) {
        PlainTurn turn;
        turn.recs = recs_per_turn[static_cast<std::size_t>(k - 1)];
        auto apply = [&](int sender, int sym) {
            auto st = m.step(state, sender, sym);
            state = st.next_state;
            for (const auto& e : expand(st.emissions, n))
                turn.sends.emplace_back(e.to,
                                        e.sym == Transducer::Emission::kEchoSym ? sym : e.sym);
        };
        if (k == 1) apply(0, 0);
        for (auto& [sender, sym] : turn.recs) apply(sender, sym);
        if (k == 1 || !turn.recs.empty()) {
            auto st = m.turn_end(state);
            state = st.next_state;
            for (const auto& e : expand(st.emissions, n))
                turn.sends.emplace_back(e.to, e.sym);
        }
        h.turns.push_back(std::move(turn));
    }
    return h;
}

std::string tag_message(int l, const std::string& sym) { return std::to_string(l) + ":" + sym; }

std::pair<int, std::string> parse_tag(const std::string& payload) {
    auto pos = payload.find(':');
    if (pos == std::string::npos) return {0, payload};
    try {
        return {std::stoi(payload.substr(0, pos)), payload.substr(pos + 1)};
    } catch (...) {
        return {0, payload};
    }
}

std::vector<TurnAction> TransducerMediator::on_scheduled(const std::vector<ReceivedMsg>& msgs) {
    std::vector<TurnAction> acts;
    if (state_ < 0) {
        state_ = spec_.machine->initial_state();
        taken_.assign(static_cast<std::size_t>(ctx_.n) + 1, 0);
        tags_seen_.assign(static_cast<std::size_t>(ctx_.n) + 1,
                          std::vector<bool>(static_cast<std::size_t>(spec_.per_agent_bound) + 1,
                                            false));
    }
    bool emitted_stop = false;
    auto apply = [&](int sender, int sym) {
        auto st = spec_.machine->step(state_, sender, sym);
        state_ = st.next_state;
        for (const auto& e : st.emissions) {
            int lo = e.to == Transducer::Emission::kBroadcast ? 1 : e.to;
            int hi = e.to == Transducer::Emission::kBroadcast ? ctx_.n : e.to;
            for (int j = lo; j <= hi; ++j) {
                int code = e.sym == Transducer::Emission::kEchoSym ? sym : e.sym;
                acts.push_back(send_to(j, spec_.sym_str(code)));
                if (spec_.is_stop(code)) emitted_stop = true;
            }
        }
    };
    bool was_first = first_;
    if (first_) {
        first_ = false;
        apply(0, 0);
    }
    int consumed = 0;
    for (const ReceivedMsg& m : msgs) {
        if (m.from < 1 || m.from > ctx_.n) continue;
        auto [tag, sym_str] = parse_tag(m.payload);
        if (spec_.canonical) {
            if (tag < 1 || tag > spec_.per_agent_bound) continue;
            if (tags_seen_[static_cast<std::size_t>(m.from)][static_cast<std::size_t>(tag)])
                continue;
            tags_seen_[static_cast<std::size_t>(m.from)][static_cast<std::size_t>(tag)] = true;
        } else {
            if (taken_[static_cast<std::size_t>(m.from)] >= spec_.per_agent_bound) continue;
        }
        ++taken_[static_cast<std::size_t>(m.from)];
        int code = spec_.sym_code(sym_str);
        if (code == 0) continue;  // out-of-alphabet strings are ignored
        ++consumed;
        apply(m.from, code);
    }
    if (was_first || consumed > 0) {
        auto st = spec_.machine->turn_end(state_);
        state_ = st.next_state;
        for (const auto& e : st.emissions) {
            int lo = e.to == Transducer::Emission::kBroadcast ? 1 : e.to;
            int hi = e.to == Transducer::Emission::kBroadcast ? ctx_.n : e.to;
            for (int j = lo; j <= hi; ++j) {
                acts.push_back(send_to(j, spec_.sym_str(e.sym)));
                if (spec_.is_stop(e.sym)) emitted_stop = true;
            }
        }
    }
    if (emitted_stop) halted_ = true;
    return acts;
}

MediatorSpec echo_mediator(int n, bool canonical) {
    MediatorSpec spec;
    spec.name = canonical ? "echo_canonical" : "echo";
    spec.n = n;
    spec.alphabet = {"", "0", "1"};
    if (canonical) {
        spec.alphabet.push_back("STOP");
        spec.stop_sym = 3;
        spec.canonical = true;
    }
    spec.per_agent_bound = 1;
    spec.responsive = true;
    auto table =
        std::make_shared<TableTransducer>(2, static_cast<int>(spec.alphabet.size()) - 1, 0);
    for (int sym = 1; sym <= table->alphabet(); ++sym) {
        if (canonical && sym == spec.stop_sym) continue;
        Transducer::Step st;
        st.next_state = 1;
        st.emissions.push_back({Transducer::Emission::kBroadcast, Transducer::Emission::kEchoSym});
        if (canonical) st.emissions.push_back({Transducer::Emission::kBroadcast, spec.stop_sym});
        table->on(0, sym, st);
    }
    spec.machine = table;
    spec.max_sends_per_turn = table_send_bound(*table, n, n * spec.per_agent_bound);
    spec.build_step = table_step_builder(table);
    return spec;
}

MediatorSpec repeat_echo_mediator(int n, int N) {
    MediatorSpec spec;
    spec.name = "repeat_echo" + std::to_string(N);
    spec.n = n;
    spec.alphabet = {"", "0", "1", "STOP"};
    spec.stop_sym = 3;
    spec.canonical = true;
    spec.responsive = true;
    spec.per_agent_bound = N;
    auto table = std::make_shared<TableTransducer>(N + 1, 3, 0);
    for (int s = 0; s < N; ++s)
        for (int sym = 1; sym <= 2; ++sym) {
            Transducer::Step st;
            st.next_state = s + 1;
            st.emissions.push_back(
                {Transducer::Emission::kBroadcast, Transducer::Emission::kEchoSym});
            if (s + 1 == N)
                st.emissions.push_back({Transducer::Emission::kBroadcast, spec.stop_sym});
            table->on(s, sym, st);
        }
    spec.machine = table;
    spec.max_sends_per_turn = table_send_bound(*table, n, n * N);
    spec.build_step = table_step_builder(table);
    return spec;
}

MediatorSpec stop_race_mediator(int n) {
    MediatorSpec spec;
    spec.name = "stop_race";
    spec.n = n;
    spec.alphabet = {"", "0", "STOP"};
    spec.stop_sym = 2;
    spec.canonical = true;
    spec.responsive = true;
    spec.per_agent_bound = 0;
    auto table = std::make_shared<TableTransducer>(2, 2, 0);
    Transducer::Step bot;
    bot.next_state = 1;
    bot.emissions.push_back({Transducer::Emission::kBroadcast, spec.stop_sym});
    table->on_bot(0, bot);
    spec.machine = table;
    spec.max_sends_per_turn = n;
    spec.build_step = table_step_builder(table);
    return spec;
}

// ---------------------------------------------------------------------------
// sum mediator: wait for valid inputs from n-t agents, reply (C, sum) and
// stop. State packs a done flag plus one input code per agent.

namespace {

class SumMachine final : public Transducer {
  public:
    SumMachine(int n, int t, int d, int base_c, int base_y, int stop_sym)
        : n_(n), t_(t), d_(d), base_c_(base_c), base_y_(base_y), stop_(stop_sym) {}

    int initial_state() const override { return 0; }
    int num_states() const override { return 2; }  // exposed width; packing is internal

    Step step(int state, int sender, int sym) const override {
        Step st;
        st.next_state = state;
        if (sym == 0) return st;
        bool done = (state & 1) != 0;
        if (done || sender < 1 || sender > n_) return st;
        int code = (state >> (1 + 3 * (sender - 1))) & 7;
        if (code != 0) return st;
        int value = (sym >= 1 && sym <= d_) ? sym - 1 : 0;
        st.next_state = state | ((value + 1) << (1 + 3 * (sender - 1)));
        return st;
    }

    // the reply fires at the mediator's own turn, over everything received
    Step turn_end(int state) const override {
        Step st;
        st.next_state = state;
        if ((state & 1) != 0) return st;
        int count = 0, mask = 0, y = 0;
        for (int j = 1; j <= n_; ++j) {
            int cj = (state >> (1 + 3 * (j - 1))) & 7;
            if (cj) {
                ++count;
                mask |= 1 << (j - 1);
                y += cj - 1;
            }
        }
        if (count < n_ - t_) return st;
        for (int j = 1; j <= n_; ++j) {
            st.emissions.push_back({j, base_c_ + 1 + mask});
            st.emissions.push_back({j, base_y_ + 1 + y});
        }
        for (int j = 1; j <= n_; ++j) st.emissions.push_back({j, stop_});
        st.next_state = state | 1;
        return st;
    }

  private:
    int n_, t_, d_, base_c_, base_y_, stop_;
};

}  // namespace

MediatorSpec sum_mediator(int n, int t, int max_input) {
    MediatorSpec spec;
    spec.name = "sum";
    spec.n = n;
    const int d = max_input;
    spec.alphabet = {""};
    for (int v = 0; v < d; ++v) spec.alphabet.push_back("v" + std::to_string(v));
    const int base_c = d;
    for (int m = 0; m < (1 << n); ++m) spec.alphabet.push_back("C" + std::to_string(m));
    const int base_y = d + (1 << n);
    for (int y = 0; y <= n * (d - 1); ++y) spec.alphabet.push_back("y" + std::to_string(y));
    spec.alphabet.push_back("STOP");
    spec.stop_sym = static_cast<int>(spec.alphabet.size()) - 1;
    spec.canonical = true;
    spec.responsive = true;
    spec.per_agent_bound = 1;
    spec.layout_states = 1;  // a single done flag
    spec.max_sends_per_turn = 3 * n;
    spec.machine = std::make_shared<SumMachine>(n, t, d, base_c, base_y, spec.stop_sym);

    spec.build_step = [n, t, d, base_c, base_y, stop = spec.stop_sym](
                          const HistoryLayout& lay, int k,
                          const std::vector<std::vector<int>>& senders, uint32_t p) {
        Circuit c;
        std::vector<int> in(static_cast<std::size_t>(lay.width()));
        for (int i = 0; i < lay.width(); ++i) in[static_cast<std::size_t>(i)] = c.in(i);

        // first slot per agent across all recorded turns (dedup is enforced
        // upstream, so at most one slot per agent exists); the reply fires at
        // the end of the first turn whose cumulative sender count reaches n-t
        std::map<int, std::pair<int, int>> slot_of;  // agent -> (turn, r)
        int crossing_turn = -1;
        {
            std::set<int> got;
            for (int kk = 1; kk <= k && crossing_turn < 0; ++kk) {
                if (kk - 1 >= static_cast<int>(senders.size())) break;
                const auto& list = senders[static_cast<std::size_t>(kk - 1)];
                for (int r = 0; r < static_cast<int>(list.size()); ++r) {
                    int j = list[static_cast<std::size_t>(r)];
                    if (j < 1 || j > n || got.count(j)) continue;
                    got.insert(j);
                    slot_of[j] = {kk, r};
                }
                if (static_cast<int>(got.size()) >= n - t) crossing_turn = kk;
            }
        }

        std::vector<std::pair<int, int>> sends;
        int done_out;
        int done_prev = k == 1 ? c.konst(0) : in[static_cast<std::size_t>(lay.slot_state(k - 1, 0))];
        if (crossing_turn == k) {
            int mask = 0;
            std::vector<std::pair<int, uint32_t>> y_terms;
            int members = 0;
            for (auto& [j, slot] : slot_of) {
                auto [kk, r] = slot;
                mask |= 1 << (j - 1);
                ++members;
                y_terms.emplace_back(in[static_cast<std::size_t>(lay.slot_rec_sym(kk, r))], 1);
            }
            // y = sum (sym_j - 1)
            int y = c.affine(y_terms, static_cast<uint32_t>((static_cast<long>(p) - 1) * members % p), p);
            int c_code = c.konst(static_cast<uint32_t>(base_c + 1 + mask));
            int y_code = c.affine({{y, 1}}, static_cast<uint32_t>(base_y + 1), p);
            for (int j = 1; j <= n; ++j) {
                sends.emplace_back(c.konst(static_cast<uint32_t>(j)), c_code);
                sends.emplace_back(c.konst(static_cast<uint32_t>(j)), y_code);
            }
            for (int j = 1; j <= n; ++j)
                sends.emplace_back(c.konst(static_cast<uint32_t>(j)),
                                   c.konst(static_cast<uint32_t>(stop)));
            done_out = c.konst(1);
        } else {
            done_out = done_prev;
        }
        while (static_cast<int>(sends.size()) < lay.max_send)
            sends.emplace_back(c.konst(0), c.konst(0));

        for (int slot = 0; slot < lay.width(); ++slot) {
            if (slot == lay.slot_turn_count()) {
                c.out(c.affine({{in[static_cast<std::size_t>(slot)], 1}}, 1, p));
                continue;
            }
            bool written = false;
            for (int l = 0; l < lay.max_send && !written; ++l) {
                if (slot == lay.slot_snd_rcpt(k, l)) {
                    c.out(sends[static_cast<std::size_t>(l)].first);
                    written = true;
                } else if (slot == lay.slot_snd_sym(k, l)) {
                    c.out(sends[static_cast<std::size_t>(l)].second);
                    written = true;
                }
            }
            if (!written && slot == lay.slot_state(k, 0)) {
                c.out(done_out);
                written = true;
            }
            if (!written) c.out(in[static_cast<std::size_t>(slot)]);
        }
        return c;
    };
    return spec;
}

}  // namespace medsim
