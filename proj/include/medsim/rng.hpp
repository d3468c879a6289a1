#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "medsim/errors.hpp"

namespace medsim {

// All randomness in the system flows through a RandomSource. There is no
// ambient randomness anywhere; every principal (agent, scheduler, coin
// service) is handed its own source derived from the run's master seed,
// so whole runs replay bit-identically.
class RandomSource {
  public:
    virtual ~RandomSource() = default;

    // One fair bit.
    virtual uint32_t bit() = 0;

    // Uniform draw from [0, n) via bit rejection. Identical algorithm for
    // seeded and tape-backed sources so runs are mode-agnostic.
    uint64_t below(uint64_t n);
};

uint64_t mix_seed(uint64_t master, uint64_t salt);
uint64_t mix_seed(uint64_t master, const std::string& salt);

class SeededSource final : public RandomSource {
  public:
    explicit SeededSource(uint64_t seed) : gen_(seed) {}
    uint32_t bit() override { return static_cast<uint32_t>(gen_() & 1u); }

  private:
    std::mt19937_64 gen_;
};

// Shared bit prefix used for exact distribution enumeration. Each complete
// run consumes some finite number of fair bits; a run that asks for a bit
// past the prefix throws TapeExhausted, and the enumerator forks the prefix
// with a 0 and a 1. A completed run has probability 2^-bits_used.
class BranchingTape {
  public:
    explicit BranchingTape(std::vector<uint8_t> prefix) : prefix_(std::move(prefix)) {}

    uint32_t next() {
        if (cursor_ >= prefix_.size()) throw TapeExhausted{cursor_ + 1};
        return prefix_[cursor_++];
    }
    std::size_t used() const { return cursor_; }
    const std::vector<uint8_t>& prefix() const { return prefix_; }
    void reset() { cursor_ = 0; }

  private:
    std::vector<uint8_t> prefix_;
    std::size_t cursor_ = 0;
};

class TapeSource final : public RandomSource {
  public:
    explicit TapeSource(BranchingTape* tape) : tape_(tape) {}
    uint32_t bit() override { return tape_->next(); }

  private:
    BranchingTape* tape_;
};

}  // namespace medsim
