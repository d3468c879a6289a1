#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "medsim/circuit.hpp"
#include "medsim/engine.hpp"
#include "medsim/layout.hpp"

namespace medsim {

// Finite-control mediator program over a message alphabet. Symbols are
// 1-based alphabet codes; 0 is reserved for "nothing". A step consumes one
// received symbol (or bot for the first/empty turn) and emits a message list.
class Transducer {
  public:
    struct Emission {
        int to;   // 1..n, or kBroadcast for every agent
        int sym;  // >0 constant symbol; kEchoSym copies the received symbol
        static constexpr int kBroadcast = -1;
        static constexpr int kEchoSym = -2;
    };
    struct Step {
        int next_state = 0;
        std::vector<Emission> emissions;
    };

    virtual ~Transducer() = default;
    virtual int initial_state() const = 0;
    virtual int num_states() const = 0;
    // sym = 0 encodes the bot step (first turn / empty turn).
    virtual Step step(int state, int sender, int sym) const = 0;
    // Applied once after a turn's receives are folded (first turn included):
    // mediators that act on their whole inbox put the action here.
    virtual Step turn_end(int state) const { return {state, {}}; }
};

// Explicit transition table, sender-agnostic.
class TableTransducer final : public Transducer {
  public:
    TableTransducer(int states, int alphabet, int initial)
        : states_(states), alphabet_(alphabet), initial_(initial),
          table_(static_cast<std::size_t>(states),
                 std::vector<Step>(static_cast<std::size_t>(alphabet) + 1)),
          bot_(static_cast<std::size_t>(states)) {
        for (int s = 0; s < states; ++s) {
            for (int c = 0; c <= alphabet; ++c)
                table_[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] = {s, {}};
            bot_[static_cast<std::size_t>(s)] = {s, {}};
        }
    }

    void on(int state, int sym, Step step) {
        if (sym == 0) throw Error("symbol 0 is the reserved identity");
        table_[static_cast<std::size_t>(state)][static_cast<std::size_t>(sym)] = std::move(step);
    }
    void on_bot(int state, Step step) { bot_[static_cast<std::size_t>(state)] = std::move(step); }

    int initial_state() const override { return initial_; }
    int num_states() const override { return states_; }
    int alphabet() const { return alphabet_; }
    Step step(int state, int /*sender*/, int sym) const override {
        if (sym == 0) return bot_[static_cast<std::size_t>(state)];
        return table_[static_cast<std::size_t>(state)][static_cast<std::size_t>(sym)];
    }
    const Step& entry(int state, int sym) const {
        return table_[static_cast<std::size_t>(state)][static_cast<std::size_t>(sym)];
    }
    const Step& bot_entry(int state) const { return bot_[static_cast<std::size_t>(state)]; }

  private:
    int states_, alphabet_, initial_;
    std::vector<std::vector<Step>> table_;
    std::vector<Step> bot_;
};

// Everything the run engine and the protocol compiler need to know about a
// mediator. The step-circuit builder receives the accepted-sender lists of
// every simulated turn so far (public knowledge once the per-turn agreement
// phases finish), which lets specialized mediators compile to circuits whose
// positions are all static.
struct MediatorSpec {
    std::string name;
    int n = 0;                          // agents served
    std::vector<std::string> alphabet;  // alphabet[0] unused; codes are 1-based
    int stop_sym = 0;                   // canonical protocols end with this code
    int per_agent_bound = 1;            // N: messages an honest agent sends
    int max_sends_per_turn = 0;         // layout sizing for one turn block
    int layout_states = -1;             // one-hot group width; -1 -> num_states()
    bool responsive = true;
    bool canonical = false;
    std::shared_ptr<Transducer> machine;
    std::function<Circuit(const HistoryLayout&, int k,
                          const std::vector<std::vector<int>>& senders_by_turn, uint32_t p)>
        build_step;

    int sym_code(const std::string& s) const;
    const std::string& sym_str(int code) const;
    bool is_stop(int code) const { return stop_sym != 0 && code == stop_sym; }

    HistoryLayout layout(uint32_t p) const;
};

// General step-circuit builder for table transducers; the bot entry fires on
// the first turn.
std::function<Circuit(const HistoryLayout&, int, const std::vector<std::vector<int>>&, uint32_t)>
table_step_builder(std::shared_ptr<TableTransducer> t);

// Mediator catalog.
MediatorSpec echo_mediator(int n, bool canonical);
MediatorSpec repeat_echo_mediator(int n, int N);  // canonical; echoes the first N messages
MediatorSpec stop_race_mediator(int n);
MediatorSpec sum_mediator(int n, int t, int max_input);  // canonical (C, sum over C) replies

// Plaintext oracle: fold the transducer over turn-structured (sender, sym)
// sequences, recording emissions per turn.
PlainHistory transducer_run(const MediatorSpec& spec,
                            const std::vector<std::vector<std::pair<int, int>>>& recs_per_turn);

// Canonical message tagging in the mediator setting ("<l>:<symbol>").
std::string tag_message(int l, const std::string& sym);
std::pair<int, std::string> parse_tag(const std::string& payload);

// The mediator-side agent protocol: reads at most N messages per agent
// (deduplicating canonical tags), folds them through the transducer, and
// sends symbol strings back; halts after emitting STOP.
class TransducerMediator final : public AgentProtocol {
  public:
    explicit TransducerMediator(MediatorSpec spec) : spec_(std::move(spec)) {}
    std::vector<TurnAction> on_scheduled(const std::vector<ReceivedMsg>& msgs) override;

  private:
    MediatorSpec spec_;
    int state_ = -1;
    bool first_ = true;
    std::vector<int> taken_;  // messages consumed per agent
    std::vector<std::vector<bool>> tags_seen_;
};

}  // namespace medsim
