#include "medsim/circuit.hpp"

#include <sstream>

#include "medsim/errors.hpp"

namespace medsim {

int Circuit::in(int input_index) {
    gates_.push_back({Op::In, input_index, -1, 0});
    num_inputs_ = std::max(num_inputs_, input_index + 1);
    return static_cast<int>(gates_.size()) - 1;
}

int Circuit::add(int a, int b) {
    gates_.push_back({Op::Add, a, b, 0});
    return static_cast<int>(gates_.size()) - 1;
}

int Circuit::mul(int a, int b) {
    gates_.push_back({Op::Mul, a, b, 0});
    if (!is_const(a) && !is_const(b)) ++interactive_muls_;
    return static_cast<int>(gates_.size()) - 1;
}

int Circuit::konst(uint32_t c) {
    gates_.push_back({Op::Const, -1, -1, c});
    return static_cast<int>(gates_.size()) - 1;
}

void Circuit::out(int g) {
    gates_.push_back({Op::Out, g, -1, 0});
    outputs_.push_back(static_cast<int>(gates_.size()) - 1);
}

int Circuit::affine(const std::vector<std::pair<int, uint32_t>>& terms, uint32_t c0, uint32_t p) {
    int acc = konst(c0 % p);
    for (auto [w, coeff] : terms) {
        if (coeff % p == 0) continue;
        acc = add(acc, cmul(w, coeff % p));
    }
    return acc;
}

std::vector<Fp> Circuit::eval_plain(const std::vector<Fp>& xs) const {
    if (static_cast<int>(xs.size()) < num_inputs_) throw Error("eval_plain: missing inputs");
    uint32_t p = xs.empty() ? 0 : xs[0].p;
    std::vector<Fp> val(gates_.size());
    for (std::size_t g = 0; g < gates_.size(); ++g) {
        const Gate& gate = gates_[g];
        switch (gate.op) {
            case Op::In:
                val[g] = xs[static_cast<std::size_t>(gate.a)];
                p = val[g].p;
                break;
            case Op::Add:
                val[g] = val[static_cast<std::size_t>(gate.a)] + val[static_cast<std::size_t>(gate.b)];
                break;
            case Op::Mul:
                val[g] = val[static_cast<std::size_t>(gate.a)] * val[static_cast<std::size_t>(gate.b)];
                break;
            case Op::Const:
                if (p == 0) throw Error("eval_plain: constant-only circuit needs an input for p");
                val[g] = Fp(gate.cval, p);
                break;
            case Op::Out:
                val[g] = val[static_cast<std::size_t>(gate.a)];
                break;
        }
    }
    std::vector<Fp> out;
    out.reserve(outputs_.size());
    for (int o : outputs_) out.push_back(val[static_cast<std::size_t>(o)]);
    return out;
}

std::string Circuit::to_text() const {
    std::ostringstream os;
    for (std::size_t g = 0; g < gates_.size(); ++g) {
        const Gate& gate = gates_[g];
        os << 'g' << g << " = ";
        switch (gate.op) {
            case Op::In: os << "IN " << gate.a; break;
            case Op::Add: os << "ADD g" << gate.a << " g" << gate.b; break;
            case Op::Mul: os << "MUL g" << gate.a << " g" << gate.b; break;
            case Op::Const: os << "CONST " << gate.cval; break;
            case Op::Out: os << "OUT g" << gate.a; break;
        }
        os << '\n';
    }
    return os.str();
}

Circuit Circuit::from_text(const std::string& text) {
    Circuit c;
    std::istringstream is(text);
    std::string line;
    auto wire = [](const std::string& tok) {
        if (tok.empty() || tok[0] != 'g') throw Error("circuit text: bad wire " + tok);
        return std::stoi(tok.substr(1));
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string gid, eq, op;
        ls >> gid >> eq >> op;
        if (eq != "=") throw Error("circuit text: bad line " + line);
        if (op == "IN") {
            int k;
            ls >> k;
            c.in(k);
        } else if (op == "ADD" || op == "MUL") {
            std::string a, b;
            ls >> a >> b;
            if (op == "ADD") c.add(wire(a), wire(b));
            else c.mul(wire(a), wire(b));
        } else if (op == "CONST") {
            uint32_t v;
            ls >> v;
            c.konst(v);
        } else if (op == "OUT") {
            std::string a;
            ls >> a;
            c.out(wire(a));
        } else {
            throw Error("circuit text: unknown op " + op);
        }
    }
    return c;
}

int eq_fermat(Circuit& c, int a, int b, uint32_t p) {
    int d = c.csub(a, b, p);
    // d^(p-1) by square and multiply
    uint32_t e = p - 1;
    int acc = -1;
    int base = d;
    while (e) {
        if (e & 1) acc = acc < 0 ? base : c.mul(acc, base);
        e >>= 1;
        if (e) base = c.mul(base, base);
    }
    return c.add(c.konst(1), c.cmul(acc, p - 1));  // 1 - d^(p-1)
}

std::vector<int> wire_powers(Circuit& c, int w, int k) {
    std::vector<int> pow(static_cast<std::size_t>(k) + 1);
    pow[0] = c.konst(1);
    if (k >= 1) pow[1] = w;
    for (int i = 2; i <= k; ++i) pow[static_cast<std::size_t>(i)] = c.mul(pow[static_cast<std::size_t>(i - 1)], w);
    return pow;
}

std::vector<int> delta_basis(Circuit& c, int w, int m, uint32_t p) {
    if (m <= 1) return {c.konst(1)};
    auto pow = wire_powers(c, w, m - 1);
    std::vector<int> deltas;
    deltas.reserve(static_cast<std::size_t>(m));
    for (int target = 0; target < m; ++target) {
        // Lagrange basis through points 0..m-1.
        std::vector<Fp> coeffs(static_cast<std::size_t>(m), Fp(0, p));
        std::vector<Fp> basis = {Fp(1, p)};
        Fp denom(1, p);
        for (int j = 0; j < m; ++j) {
            if (j == target) continue;
            std::vector<Fp> next(basis.size() + 1, Fp(0, p));
            for (std::size_t d = 0; d < basis.size(); ++d) {
                next[d + 1] = next[d + 1] + basis[d];
                next[d] = next[d] - basis[d] * Fp(j, p);
            }
            basis = std::move(next);
            denom = denom * (Fp(target, p) - Fp(j, p));
        }
        Fp inv = denom.inv();
        std::vector<std::pair<int, uint32_t>> terms;
        for (std::size_t d = 0; d < basis.size(); ++d) {
            Fp coeff = basis[d] * inv;
            if (!coeff.zero()) terms.emplace_back(pow[d], coeff.v);
        }
        deltas.push_back(c.affine(terms, 0, p));
    }
    return deltas;
}

}  // namespace medsim
