#pragma once

#include <functional>
#include <optional>

#include "medsim/circuit.hpp"
#include "medsim/hub_agent.hpp"

namespace medsim {

// Per-instance randomness for multiplications and output re-randomization:
// every agent deals one batched sharing of fresh uniform (r, u) pairs plus
// zero slots; an ACS pins a common dealer core and the working masks are
// the core sums. A batch laid out as [r0 u0 r1 u1 ... z0 z1 ...].
class MaskPool {
  public:
    MaskPool(Hub* hub, uint16_t index, uint16_t round, int muls, int zeros)
        : hub_(hub), index_(index), round_(round), muls_(muls), zeros_(zeros) {}

    void start(RandomSource& rng);
    bool ready() const;
    std::pair<Fp, Fp> mask(int seq) const;          // core sums
    Fp zero_share(int z, int core_member) const;    // one member's zero slot
    std::vector<int> core() const;
    InstanceLabel vss_label(int dealer) const {
        return {Kind::Vss, static_cast<uint8_t>(dealer), index_, round_};
    }
    InstanceLabel acs_label() const { return {Kind::Acs, 0, index_, round_}; }
    int muls() const { return muls_; }

  private:
    Hub* hub_;
    uint16_t index_, round_;
    int muls_, zeros_;
};

// C': append fresh zero-input wires, multiply them together, and add the
// product to the single output. Reconstructs to the same value no matter
// what was actually shared into the zero slots.
Circuit randomize_output(const Circuit& c, int zero_inputs, uint32_t p);

// One agent of the plain shared-evaluation protocol: share the input, agree
// on a core, evaluate the circuit on the core-restricted inputs, open the
// outputs, output a formatted result. This is the chassis for the secure
// function evaluation protocol and the circuit-correctness suites.
class CircuitEvalAgent : public HubAgent {
  public:
    struct Config {
        const Circuit* f = nullptr;
        bool wrap = false;  // evaluate the randomizer variant C'
        // format(opened outputs, input core); default "i,j,...|v1,v2,..."
        std::function<std::string(const std::vector<Fp>&, const std::vector<int>&)> format;
        std::function<Fp(const AgentContext&, RandomSource&)> input_value;  // default: parse int
    };

    CircuitEvalAgent(int t, uint32_t p, Config cfg);

  protected:
    void first_turn() override;
    void process() override;
    virtual void on_result(const std::vector<Fp>& opened, const std::vector<int>& core);

    Config cfg_;
    std::optional<MaskPool> pool_;
    std::optional<Circuit> compiled_;
    std::vector<int> input_core_;
    bool core_known_ = false, cc_started_ = false, opens_started_ = false;
    std::vector<std::optional<Fp>> opened_;
};

// Shared random bit: every agent shares a bit, contributions are validated
// by opening b^2 - b, an ACS picks at least t+1 validated sharers, and the
// bit is the xor over the core. The test hook opens the resulting bit.
class RandomBitAgent : public HubAgent {
  public:
    // force_value: share this instead of a fresh random bit (catalog misuse)
    RandomBitAgent(int t, uint32_t p, std::optional<uint32_t> force_value = std::nullopt);

  protected:
    void first_turn() override;
    void process() override;

  private:
    std::optional<uint32_t> force_;
    std::optional<MaskPool> pool_;
    std::set<int> checks_started_, valid_;
    std::map<int, Circuit> check_circuits_;
    std::optional<Circuit> xor_circuit_;
    std::vector<int> core_;
    bool acs_started_ = false, core_known_ = false, xor_started_ = false, open_started_ = false;
};

}  // namespace medsim
