#include "medsim/field.hpp"

#include <algorithm>

namespace medsim {

Fp Fp::pow(uint64_t e) const {
    Fp base = *this;
    Fp acc(1, p);
    while (e) {
        if (e & 1) acc = acc * base;
        base = base * base;
        e >>= 1;
    }
    return acc;
}

Fp Fp::inv() const {
    if (v == 0) throw DivisionByZero();
    return pow(p - 2);  // p prime
}

bool is_prime(uint32_t p) {
    if (p < 2) return false;
    for (uint32_t d = 2; d * d <= p; ++d)
        if (p % d == 0) return false;
    return true;
}

Poly::Poly(std::vector<Fp> coeffs, uint32_t p) : coeffs_(std::move(coeffs)), p_(p) {
    while (!coeffs_.empty() && coeffs_.back().zero()) coeffs_.pop_back();
}

Poly Poly::constant(Fp c) {
    if (c.zero()) return Poly({}, c.p);
    return Poly({c}, c.p);
}

Fp Poly::eval(Fp x) const {
    Fp acc(0, p_);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

Fp Poly::coeff(std::size_t i) const {
    if (i < coeffs_.size()) return coeffs_[i];
    return Fp(0, p_);
}

namespace {

// Gaussian elimination over F_p. Returns one solution of A x = b (A given as
// rows of width vars, b appended as last column), or false if inconsistent.
// Free variables are set to zero.
bool solve_linear(std::vector<std::vector<Fp>> rows, int vars, std::vector<Fp>& out, uint32_t p) {
    int nrows = static_cast<int>(rows.size());
    std::vector<int> pivot_col(nrows, -1);
    int r = 0;
    for (int c = 0; c < vars && r < nrows; ++c) {
        int sel = -1;
        for (int i = r; i < nrows; ++i)
            if (!rows[i][c].zero()) {
                sel = i;
                break;
            }
        if (sel < 0) continue;
        std::swap(rows[r], rows[sel]);
        Fp inv = rows[r][c].inv();
        for (int j = c; j <= vars; ++j) rows[r][j] = rows[r][j] * inv;
        for (int i = 0; i < nrows; ++i) {
            if (i == r || rows[i][c].zero()) continue;
            Fp f = rows[i][c];
            for (int j = c; j <= vars; ++j) rows[i][j] = rows[i][j] - f * rows[r][j];
        }
        pivot_col[r] = c;
        ++r;
    }
    for (int i = r; i < nrows; ++i)
        if (!rows[i][vars].zero()) return false;
    out.assign(vars, Fp(0, p));
    for (int i = 0; i < r; ++i) out[pivot_col[i]] = rows[i][vars];
    return true;
}

}  // namespace

Poly interpolate(const std::vector<std::pair<Fp, Fp>>& points, int degree_bound) {
    if (degree_bound < 0) throw Error("negative degree bound");
    if (static_cast<int>(points.size()) < degree_bound + 1)
        throw Error("interpolate: not enough points");
    uint32_t p = points.front().first.p;

    // Lagrange through the first degree_bound+1 points.
    int k = degree_bound + 1;
    std::vector<Fp> acc(static_cast<std::size_t>(k), Fp(0, p));
    for (int i = 0; i < k; ++i) {
        // Basis polynomial for point i, times y_i.
        std::vector<Fp> basis = {Fp(1, p)};
        Fp denom(1, p);
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            // basis *= (x - x_j)
            std::vector<Fp> next(basis.size() + 1, Fp(0, p));
            for (std::size_t d = 0; d < basis.size(); ++d) {
                next[d + 1] = next[d + 1] + basis[d];
                next[d] = next[d] - basis[d] * points[j].first;
            }
            basis = std::move(next);
            denom = denom * (points[i].first - points[j].first);
        }
        Fp scale = points[i].second * denom.inv();
        for (std::size_t d = 0; d < basis.size(); ++d) acc[d] = acc[d] + basis[d] * scale;
    }
    Poly q(acc, p);
    for (std::size_t i = static_cast<std::size_t>(k); i < points.size(); ++i)
        if (q.eval(points[i].first) != points[i].second) throw Inconsistent();
    return q;
}

Poly rs_decode(const ShareVector& shares, int degree_bound, int max_errors) {
    if (shares.entries.empty()) throw DecodeFailure("no shares");
    uint32_t p = shares.entries.begin()->second.p;
    std::vector<std::pair<Fp, Fp>> pts;
    pts.reserve(shares.size());
    for (const auto& [idx, val] : shares.entries) pts.emplace_back(Fp(idx, p), val);
    int m = static_cast<int>(pts.size());

    for (int e = 0; e <= max_errors; ++e) {
        if (m < degree_bound + 1 + 2 * e) break;
        // Find E (monic, deg e) and Q (deg <= degree_bound + e) with
        // Q(x_i) = y_i * E(x_i) for all i. Unknowns: e coeffs of E (low part)
        // plus degree_bound+e+1 coeffs of Q.
        int qn = degree_bound + e + 1;
        int vars = e + qn;
        std::vector<std::vector<Fp>> rows;
        rows.reserve(pts.size());
        for (auto& [x, y] : pts) {
            std::vector<Fp> row(static_cast<std::size_t>(vars) + 1, Fp(0, p));
            Fp xp(1, p);
            for (int j = 0; j < e; ++j) {
                row[j] = -(y * xp);
                xp = xp * x;
            }
            Fp x_e = xp;  // x^e
            xp = Fp(1, p);
            for (int j = 0; j < qn; ++j) {
                row[e + j] = xp;
                xp = xp * x;
            }
            row[vars] = y * x_e;  // move monic term to RHS
            rows.push_back(std::move(row));
        }
        std::vector<Fp> sol;
        if (!solve_linear(std::move(rows), vars, sol, p)) continue;

        // Divide Q by E exactly; reject on remainder.
        std::vector<Fp> ec(sol.begin(), sol.begin() + e);
        ec.push_back(Fp(1, p));  // monic
        std::vector<Fp> qc(sol.begin() + e, sol.end());
        while (!qc.empty() && qc.back().zero()) qc.pop_back();
        std::vector<Fp> quot(qc.size(), Fp(0, p));
        bool exact = true;
        std::vector<Fp> rem = qc;
        int de = e;
        while (static_cast<int>(rem.size()) - 1 >= de) {
            int shift = static_cast<int>(rem.size()) - 1 - de;
            Fp f = rem.back();  // E is monic
            quot[static_cast<std::size_t>(shift)] = f;
            for (int j = 0; j <= de; ++j)
                rem[static_cast<std::size_t>(shift + j)] =
                    rem[static_cast<std::size_t>(shift + j)] - f * ec[static_cast<std::size_t>(j)];
            while (!rem.empty() && rem.back().zero()) rem.pop_back();
        }
        if (!rem.empty()) exact = false;
        if (!exact) continue;
        Poly cand(quot, p);
        if (cand.degree() > degree_bound) continue;
        int mismatches = 0;
        for (auto& [x, y] : pts)
            if (cand.eval(x) != y) ++mismatches;
        if (mismatches <= max_errors) return cand;
    }
    throw DecodeFailure();
}

Sharing sample_sharing(Fp secret, int t, int n, RandomSource& rng) {
    std::vector<Fp> coeffs;
    coeffs.reserve(static_cast<std::size_t>(t) + 1);
    coeffs.push_back(secret);
    for (int i = 0; i < t; ++i) coeffs.emplace_back(rng.below(secret.p), secret.p);
    Poly q(coeffs, secret.p);
    Sharing s{q, {}};
    for (int i = 1; i <= n; ++i) s.shares.set(i, q.eval(Fp(i, secret.p)));
    return s;
}

ShareVector unique_full_extension(const ShareVector& partial, int t, int n) {
    if (static_cast<int>(partial.size()) < t + 1)
        throw NotRealizable("fewer than t+1 entries");
    uint32_t p = partial.entries.begin()->second.p;
    std::vector<std::pair<Fp, Fp>> pts;
    for (const auto& [idx, val] : partial.entries) pts.emplace_back(Fp(idx, p), val);
    Poly q;
    try {
        q = interpolate(pts, t);
    } catch (const Inconsistent&) {
        throw NotRealizable();
    }
    ShareVector full;
    for (int i = 1; i <= n; ++i) full.set(i, q.eval(Fp(i, p)));
    return full;
}

bool is_realizable(const ShareVector& partial, int t, uint32_t p) {
    if (partial.entries.empty()) return true;
    std::vector<std::pair<Fp, Fp>> pts;
    for (const auto& [idx, val] : partial.entries) pts.emplace_back(Fp(idx, p), val);
    if (static_cast<int>(pts.size()) <= t + 1) return true;
    try {
        interpolate(pts, t);
        return true;
    } catch (const Inconsistent&) {
        return false;
    }
}

}  // namespace medsim
