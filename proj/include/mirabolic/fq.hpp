#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mirabolic {

/// Row-echelon linear algebra over a prime field F_q, ambient dimension <= ~8.
/// Vectors are std::vector<int> with entries in [0, q).

namespace fq {

inline int normalize(long long x, int q) {
    int r = int(x % q);
    return r < 0 ? r + q : r;
}

inline int inv_mod(int a, int q) {
    a = normalize(a, q);
    if (a == 0) throw std::domain_error("inverse of zero");
    for (int x = 1; x < q; ++x)
        if (x * a % q == 1) return x;
    throw std::domain_error("not invertible");
}

/// Reduce rows in place to canonical reduced row-echelon form; returns rank.
inline int rref(std::vector<std::vector<int>>& rows, int q) {
    const int d = rows.empty() ? 0 : int(rows[0].size());
    int r = 0;
    for (int col = 0; col < d && r < int(rows.size()); ++col) {
        int piv = -1;
        for (int i = r; i < int(rows.size()); ++i)
            if (rows[i][col] != 0) { piv = i; break; }
        if (piv < 0) continue;
        std::swap(rows[r], rows[piv]);
        const int s = inv_mod(rows[r][col], q);
        for (int j = 0; j < d; ++j) rows[r][j] = rows[r][j] * s % q;
        for (int i = 0; i < int(rows.size()); ++i) {
            if (i == r || rows[i][col] == 0) continue;
            const int f = rows[i][col];
            for (int j = 0; j < d; ++j)
                rows[i][j] = normalize(rows[i][j] - (long long)f * rows[r][j], q);
        }
        ++r;
    }
    rows.resize(r);
    return r;
}

} // namespace fq

/// A subspace of F_q^d in canonical reduced row-echelon form.
struct FqSubspace {
    int q = 2, d = 0;
    std::vector<std::vector<int>> basis; // RREF rows, canonical per subspace

    FqSubspace() = default;
    FqSubspace(int q_, int d_) : q(q_), d(d_) {}
    FqSubspace(int q_, int d_, std::vector<std::vector<int>> rows) : q(q_), d(d_), basis(std::move(rows)) {
        fq::rref(basis, q);
    }

    static FqSubspace zero(int q, int d) { return FqSubspace(q, d); }
    static FqSubspace full(int q, int d) {
        FqSubspace s(q, d);
        for (int i = 0; i < d; ++i) {
            std::vector<int> e(d, 0);
            e[i] = 1;
            s.basis.push_back(e);
        }
        return s;
    }

    int dim() const { return int(basis.size()); }
    bool operator==(const FqSubspace& o) const { return basis == o.basis; }
    bool operator<(const FqSubspace& o) const { return basis < o.basis; }

    bool contains(const std::vector<int>& v) const {
        std::vector<int> w = v;
        for (auto& row : basis) {
            int lead = -1;
            for (int j = 0; j < d; ++j)
                if (row[j] != 0) { lead = j; break; }
            if (lead >= 0 && w[lead] != 0) {
                const int f = w[lead];
                for (int j = 0; j < d; ++j) w[j] = fq::normalize(w[j] - (long long)f * row[j], q);
            }
        }
        return std::all_of(w.begin(), w.end(), [](int x) { return x == 0; });
    }
    bool contains(const FqSubspace& o) const {
        for (auto& row : o.basis)
            if (!contains(row)) return false;
        return true;
    }
};

inline FqSubspace span_sum(const FqSubspace& a, const FqSubspace& b) {
    if (a.q != b.q || a.d != b.d) throw std::invalid_argument("mismatched ambient space");
    std::vector<std::vector<int>> rows = a.basis;
    rows.insert(rows.end(), b.basis.begin(), b.basis.end());
    return FqSubspace(a.q, a.d, std::move(rows));
}

/// Intersection via the kernel of the stacked generating sets.
inline FqSubspace intersect(const FqSubspace& a, const FqSubspace& b) {
    if (a.q != b.q || a.d != b.d) throw std::invalid_argument("mismatched ambient space");
    const int q = a.q, d = a.d;
    const int na = a.dim(), nb = b.dim();
    if (na == 0 || nb == 0) return FqSubspace::zero(q, d);
    // Solve x*A = y*B: kernel of [A; -B]^T, read off the A-combination part.
    // Build the (na+nb) x d stacked matrix and compute its left null space by
    // row-reducing [M | I].
    std::vector<std::vector<int>> m(na + nb, std::vector<int>(d + na + nb, 0));
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < d; ++j) m[i][j] = a.basis[i][j];
        m[i][d + i] = 1;
    }
    for (int i = 0; i < nb; ++i) {
        for (int j = 0; j < d; ++j) m[na + i][j] = fq::normalize(-b.basis[i][j], q);
        m[na + i][d + na + i] = 1;
    }
    fq::rref(m, q);
    std::vector<std::vector<int>> gens;
    for (auto& row : m) {
        bool zero_left = true;
        for (int j = 0; j < d; ++j)
            if (row[j] != 0) { zero_left = false; break; }
        if (!zero_left) continue;
        // Row encodes a relation sum c_i a_i + sum e_i (-b_i) = 0; the vector
        // sum c_i a_i lies in the intersection.
        std::vector<int> v(d, 0);
        for (int i = 0; i < na; ++i) {
            if (row[d + i] == 0) continue;
            for (int j = 0; j < d; ++j)
                v[j] = fq::normalize(v[j] + (long long)row[d + i] * a.basis[i][j], q);
        }
        gens.push_back(v);
    }
    return FqSubspace(q, d, std::move(gens));
}

/// An n-step flag 0 = W_0 <= W_1 <= ... <= W_n = F_q^d.
struct FqFlag {
    std::vector<FqSubspace> steps; // size n+1

    int n() const { return int(steps.size()) - 1; }
    const FqSubspace& at(int i) const {
        static const FqSubspace dummy;
        (void)dummy;
        return steps[size_t(i)];
    }
    bool operator==(const FqFlag& o) const { return steps == o.steps; }
    bool operator<(const FqFlag& o) const { return steps < o.steps; }
};

/// All subspaces of F_q^d, by enumerating RREF matrices per pivot pattern.
inline std::vector<FqSubspace> all_subspaces(int q, int d) {
    std::vector<FqSubspace> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
        std::vector<int> pivots;
        for (int j = 0; j < d; ++j)
            if (mask & (1 << j)) pivots.push_back(j);
        const int k = int(pivots.size());
        // free positions: entries to the right of each pivot, off other pivots
        std::vector<std::pair<int, int>> free_pos;
        for (int r = 0; r < k; ++r)
            for (int j = pivots[r] + 1; j < d; ++j)
                if (!std::binary_search(pivots.begin(), pivots.end(), j))
                    free_pos.push_back({r, j});
        const size_t nf = free_pos.size();
        std::vector<int> vals(nf, 0);
        while (true) {
            std::vector<std::vector<int>> rows(k, std::vector<int>(d, 0));
            for (int r = 0; r < k; ++r) rows[r][pivots[r]] = 1;
            for (size_t t = 0; t < nf; ++t) rows[free_pos[t].first][free_pos[t].second] = vals[t];
            FqSubspace s(q, d);
            s.basis = std::move(rows);
            out.push_back(std::move(s));
            size_t t = 0;
            while (t < nf && ++vals[t] == q) vals[t++] = 0;
            if (t == nf) break;
            if (nf == 0) break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// All n-step flags in F_q^d (deterministic order).
inline std::vector<FqFlag> all_flags(int n, int d, int q) {
    auto subs = all_subspaces(q, d);
    std::vector<FqFlag> out;
    FqFlag f;
    f.steps.assign(size_t(n) + 1, FqSubspace::zero(q, d));
    f.steps[size_t(n)] = FqSubspace::full(q, d);
    std::function<void(int)> rec = [&](int i) {
        if (i == n) {
            out.push_back(f);
            return;
        }
        for (auto& s : subs) {
            if (!s.contains(f.steps[size_t(i) - 1])) continue;
            f.steps[size_t(i)] = s;
            rec(i + 1);
        }
    };
    rec(1);
    return out;
}

/// All vectors of F_q^d in lexicographic order.
inline std::vector<std::vector<int>> all_vectors(int q, int d) {
    std::vector<std::vector<int>> out;
    std::vector<int> v(d, 0);
    while (true) {
        out.push_back(v);
        int t = 0;
        while (t < d && ++v[t] == q) v[t++] = 0;
        if (t == d) break;
        if (d == 0) break;
    }
    if (d == 0) out.assign(1, {});
    return out;
}

inline std::vector<int> vec_sub(const std::vector<int>& a, const std::vector<int>& b, int q) {
    std::vector<int> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = fq::normalize(a[i] - b[i], q);
    return r;
}
inline std::vector<int> vec_add(const std::vector<int>& a, const std::vector<int>& b, int q) {
    std::vector<int> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = fq::normalize(a[i] + b[i], q);
    return r;
}

} // namespace mirabolic
