#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "medsim/errors.hpp"
#include "medsim/rng.hpp"

namespace medsim {

// Residue in F_p. Elements carry their modulus so mixed-modulus use inside
// one process (protocol runs at p=97 next to oracle suites at p=5) stays
// safe; arithmetic on mismatched moduli is a programming error.
struct Fp {
    uint32_t v = 0;
    uint32_t p = 0;

    Fp() = default;
    Fp(uint64_t value, uint32_t modulus) : v(static_cast<uint32_t>(value % modulus)), p(modulus) {}

    friend Fp operator+(Fp a, Fp b) {
        a.check(b);
        return Fp(static_cast<uint64_t>(a.v) + b.v, a.p);
    }
    friend Fp operator-(Fp a, Fp b) {
        a.check(b);
        return Fp(static_cast<uint64_t>(a.v) + a.p - b.v, a.p);
    }
    friend Fp operator*(Fp a, Fp b) {
        a.check(b);
        return Fp(static_cast<uint64_t>(a.v) * b.v, a.p);
    }
    Fp operator-() const { return Fp(static_cast<uint64_t>(p) - v, p); }
    friend bool operator==(Fp a, Fp b) { return a.v == b.v && a.p == b.p; }
    friend bool operator!=(Fp a, Fp b) { return !(a == b); }

    Fp inv() const;
    Fp pow(uint64_t e) const;
    bool zero() const { return v == 0; }

  private:
    void check(const Fp& o) const {
        if (p == 0 || o.p != p) throw Error("field modulus mismatch");
    }
};

inline Fp fe_add(Fp a, Fp b) { return a + b; }
inline Fp fe_mul(Fp a, Fp b) { return a * b; }
inline Fp fe_neg(Fp a) { return -a; }
inline Fp fe_inv(Fp a) { return a.inv(); }

bool is_prime(uint32_t p);

// Dense polynomial over F_p, coefficients low-to-high. Trailing zero
// coefficients are stripped; the zero polynomial has an empty list.
class Poly {
  public:
    Poly() = default;
    Poly(std::vector<Fp> coeffs, uint32_t p);
    static Poly zero(uint32_t p) { return Poly({}, p); }
    static Poly constant(Fp c);

    Fp eval(Fp x) const;  // Horner
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }  // -1 for zero poly
    const std::vector<Fp>& coeffs() const { return coeffs_; }
    uint32_t modulus() const { return p_; }
    Fp coeff(std::size_t i) const;

    friend bool operator==(const Poly& a, const Poly& b) {
        return a.p_ == b.p_ && a.coeffs_ == b.coeffs_;
    }

  private:
    std::vector<Fp> coeffs_;
    uint32_t p_ = 0;
};

// Partial map agent-index -> share value, indices in [1, n].
struct ShareVector {
    std::map<int, Fp> entries;

    void set(int idx, Fp v) { entries[idx] = v; }
    bool has(int idx) const { return entries.count(idx) != 0; }
    Fp at(int idx) const { return entries.at(idx); }
    std::size_t size() const { return entries.size(); }
};

// Unique poly of degree <= degree_bound through the first degree_bound+1
// points; throws Inconsistent if the remaining points disagree.
Poly interpolate(const std::vector<std::pair<Fp, Fp>>& points, int degree_bound);

// Berlekamp-Welch: the unique poly of degree <= degree_bound agreeing with
// all but <= max_errors entries. Throws DecodeFailure when none exists.
Poly rs_decode(const ShareVector& shares, int degree_bound, int max_errors);

struct Sharing {
    Poly poly;
    ShareVector shares;
};

// Uniform degree-<=t polynomial with q(0) = secret; shares q(i) for i=1..n.
Sharing sample_sharing(Fp secret, int t, int n, RandomSource& rng);

// The unique ShareVector over [1, n] extending `partial` on a degree-<=t
// polynomial. Requires >= t+1 entries; throws NotRealizable otherwise.
ShareVector unique_full_extension(const ShareVector& partial, int t, int n);

// True iff some degree-<=t poly q has q(i)=entry(i) for all present i.
bool is_realizable(const ShareVector& partial, int t, uint32_t p);

}  // namespace medsim
