#pragma once

#include <string>
#include <vector>

#include "medsim/field.hpp"

namespace medsim {

// Arithmetic circuit over F_p: fan-in-2 Add/Mul plus Const and In leaves;
// Out gates mark the result wires. Gates reference earlier gate ids only.
// A Mul with a Const operand is scalar multiplication and is evaluated
// locally by the shared evaluator; only Mul gates with two non-constant
// operands cost a degree reduction.
class Circuit {
  public:
    enum class Op : uint8_t { In, Add, Mul, Const, Out };
    struct Gate {
        Op op;
        int a = -1;        // In: input index; Add/Mul: left; Out: source
        int b = -1;        // Add/Mul: right
        uint32_t cval = 0; // Const
    };

    int in(int input_index);
    int add(int a, int b);
    int mul(int a, int b);
    int konst(uint32_t c);
    int cmul(int a, uint32_t c) { return mul(a, konst(c)); }
    int csub(int a, int b, uint32_t p) { return add(a, cmul(b, p - 1)); }  // a - b
    void out(int g);

    // Convenience: affine combination c0 + sum(ci * wi).
    int affine(const std::vector<std::pair<int, uint32_t>>& terms, uint32_t c0, uint32_t p);

    int num_inputs() const { return num_inputs_; }
    int interactive_muls() const { return interactive_muls_; }
    const std::vector<Gate>& gates() const { return gates_; }
    const std::vector<int>& outputs() const { return outputs_; }

    std::vector<Fp> eval_plain(const std::vector<Fp>& xs) const;

    std::string to_text() const;
    static Circuit from_text(const std::string& text);

  private:
    bool is_const(int g) const { return gates_[static_cast<std::size_t>(g)].op == Op::Const; }
    std::vector<Gate> gates_;
    std::vector<int> outputs_;
    int num_inputs_ = 0;
    int interactive_muls_ = 0;
};

// 1 - (a-b)^(p-1); equals 1 iff a == b.
int eq_fermat(Circuit& c, int a, int b, uint32_t p);

// Powers w^0..w^k of one wire (w^0 is a Const 1); k-1 interactive muls.
std::vector<int> wire_powers(Circuit& c, int w, int k);

// One-hot indicator wires over the domain {0..m-1} for a wire known to take
// values in that domain: delta[c] = 1 iff w == c. Linear in the powers of w,
// so costs m-2 interactive muls total (shared across all m indicators).
std::vector<int> delta_basis(Circuit& c, int w, int m, uint32_t p);

}  // namespace medsim
