#pragma once

// Test-only brute-force oracles, kept independent of the library's decode
// and extension paths so the two routes can be cross-checked.

#include <optional>
#include <vector>

#include "medsim/field.hpp"

namespace medsim::testing {

// Enumerate every polynomial of degree <= bound over F_p (p small).
inline std::vector<Poly> all_polys(uint32_t p, int bound) {
    std::vector<Poly> out;
    std::vector<Fp> coeffs(static_cast<std::size_t>(bound) + 1, Fp(0, p));
    std::size_t total = 1;
    for (int i = 0; i <= bound; ++i) total *= p;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (int i = 0; i <= bound; ++i) {
            coeffs[static_cast<std::size_t>(i)] = Fp(c % p, p);
            c /= p;
        }
        out.emplace_back(coeffs, p);
    }
    return out;
}

// Exhaustive nearest-codeword search: the unique poly of degree <= bound
// within Hamming distance max_errors of the shares, if any.
inline std::optional<Poly> brute_decode(const ShareVector& shares, int bound, int max_errors,
                                        uint32_t p) {
    std::optional<Poly> found;
    for (const Poly& q : all_polys(p, bound)) {
        int d = 0;
        for (const auto& [idx, val] : shares.entries)
            if (q.eval(Fp(idx, p)) != val) ++d;
        if (d <= max_errors) {
            if (found && !(*found == q)) return std::nullopt;  // ambiguous
            found = q;
        }
    }
    return found;
}

inline std::optional<Poly> brute_fit(const ShareVector& partial, int t, uint32_t p) {
    return brute_decode(partial, t, 0, p);
}

}  // namespace medsim::testing
