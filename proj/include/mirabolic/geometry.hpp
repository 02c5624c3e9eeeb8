#pragma once

#include "mirabolic/decorated.hpp"
#include "mirabolic/fq.hpp"
#include "mirabolic/laurent.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mirabolic {

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Step budget for the enumeration-heavy oracle routines. A step is one
/// triple classification (or comparable unit of work).
struct Budget {
    long long limit = 1'000'000'000;
    long long used = 0;
    void tick(long long n = 1) {
        used += n;
        if (used > limit) throw BudgetExceeded("classification budget exceeded (" + std::to_string(limit) + " steps)");
    }
};

inline Budget& global_budget() {
    static Budget b;
    return b;
}

/// A point of the triple space: two flags plus a vector.
struct FqTriple {
    FqFlag f, f2;
    std::vector<int> w;
    int q = 2;
};

/// Canonical point of the orbit labelled by m: standard basis vectors are
/// dealt to the cells in reading order, the flags are the row/column span
/// filtrations, and w picks the first vector of every marked cell.
inline FqTriple canonical_triple(const DecoratedMatrix& m, int q) {
    if (!validate(m, LabelMode::standard))
        throw std::invalid_argument("canonical_triple: invalid label");
    const int d = m.total();
    std::vector<std::vector<int>> cell_first(size_t(m.rows) * m.cols, std::vector<int>());
    int next = 0;
    std::vector<std::vector<std::vector<int>>> row_vecs(m.rows + 1), col_vecs(m.cols + 1);
    std::vector<int> w(d, 0);
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j)
            for (int t = 0; t < m.at(i, j); ++t) {
                std::vector<int> e(d, 0);
                e[next++] = 1;
                row_vecs[i].push_back(e);
                col_vecs[j].push_back(e);
                if (t == 0 && m.marked(i, j))
                    for (int c = 0; c < d; ++c) w[c] = fq::normalize(w[c] + e[c], q);
            }
    FqTriple tr;
    tr.q = q;
    tr.f.steps.assign(m.rows + 1, FqSubspace::zero(q, d));
    tr.f2.steps.assign(m.cols + 1, FqSubspace::zero(q, d));
    std::vector<std::vector<int>> acc;
    for (int i = 1; i <= m.rows; ++i) {
        acc.insert(acc.end(), row_vecs[i].begin(), row_vecs[i].end());
        tr.f.steps[i] = FqSubspace(q, d, acc);
    }
    acc.clear();
    for (int j = 1; j <= m.cols; ++j) {
        acc.insert(acc.end(), col_vecs[j].begin(), col_vecs[j].end());
        tr.f2.steps[j] = FqSubspace(q, d, acc);
    }
    tr.w = w;
    return tr;
}

/// Precomputed pairwise intersections for a fixed pair of flags.
struct FlagPairTable {
    int rows = 0, cols = 0, q = 2, d = 0;
    std::vector<FqSubspace> inter; // (rows+1) x (cols+1)
    const FqSubspace& at(int i, int j) const { return inter[size_t(i) * (cols + 1) + j]; }
};

inline FlagPairTable intersection_table(const FqFlag& f, const FqFlag& f2) {
    FlagPairTable t;
    t.rows = f.n();
    t.cols = f2.n();
    t.q = f.steps[0].q;
    t.d = f.steps[0].d;
    t.inter.assign(size_t(t.rows + 1) * (t.cols + 1), FqSubspace::zero(t.q, t.d));
    for (int i = 0; i <= t.rows; ++i)
        for (int j = 0; j <= t.cols; ++j)
            t.inter[size_t(i) * (t.cols + 1) + j] = intersect(f.steps[i], f2.steps[j]);
    return t;
}

/// Relative-position matrix of a flag pair.
inline DecoratedMatrix position_matrix(const FlagPairTable& t) {
    DecoratedMatrix m(t.rows, t.cols);
    for (int i = 1; i <= t.rows; ++i)
        for (int j = 1; j <= t.cols; ++j)
            m.at(i, j) = t.at(i, j).dim() - t.at(i - 1, j).dim() - t.at(i, j - 1).dim() +
                         t.at(i - 1, j - 1).dim();
    return m;
}

/// The complete orbit invariant of a triple: the position matrix plus the
/// unique staircase mark set carrying the vector. Uniqueness is asserted by
/// exhausting every candidate; zero or several qualifying sets is an error.
inline DecoratedMatrix orbit_invariant(const FqTriple& tr, Budget* budget = nullptr) {
    if (budget) budget->tick();
    auto table = intersection_table(tr.f, tr.f2);
    DecoratedMatrix m = position_matrix(table);
    const int q = tr.q, d = table.d;

    auto span_of = [&](const std::vector<std::pair<int, int>>& cells,
                       const std::vector<std::pair<int, int>>& extra) {
        std::vector<std::vector<int>> rows;
        for (auto& [i, j] : cells) {
            auto& s = table.at(i, j).basis;
            rows.insert(rows.end(), s.begin(), s.end());
        }
        for (auto& [i, j] : extra) {
            auto& s = table.at(i, j).basis;
            rows.insert(rows.end(), s.begin(), s.end());
        }
        return FqSubspace(q, d, rows);
    };

    std::vector<std::vector<std::pair<int, int>>> hits;
    for (auto& cand : all_decorations(m, LabelMode::standard)) {
        if (!span_of(cand, {}).contains(tr.w)) continue;
        bool minimal = true;
        for (size_t t = 0; t < cand.size() && minimal; ++t) {
            std::vector<std::pair<int, int>> rest;
            for (size_t s = 0; s < cand.size(); ++s)
                if (s != t) rest.push_back(cand[s]);
            auto [i, j] = cand[t];
            if (span_of(rest, {{i - 1, j}, {i, j - 1}}).contains(tr.w)) minimal = false;
        }
        if (minimal) hits.push_back(cand);
    }
    if (hits.size() != 1) throw std::runtime_error("orbit classification ambiguous");
    m.delta = hits[0];
    return m;
}

/// Convolution count at the canonical point of `target`: the number of pairs
/// (flag, vector) splitting the target triple into a `left` triple followed
/// by a `right` triple.
inline long long convolution_count(const DecoratedMatrix& left, const DecoratedMatrix& right,
                                   const DecoratedMatrix& target, int q,
                                   Budget* budget = nullptr) {
    if (co(left) != ro(right)) return 0;
    if (ro(left) != ro(target) || co(right) != co(target)) return 0;
    Budget local;
    if (!budget) budget = &local;
    const FqTriple tr = canonical_triple(target, q);
    const int d = target.total();
    auto mids = all_flags(left.cols, d, q);
    auto vecs = all_vectors(q, d);
    long long count = 0;
    for (auto& g : mids) {
        // cheap flag-position pre-check before touching vectors
        if (position_matrix(intersection_table(tr.f, g)).a != left.a) {
            budget->tick();
            continue;
        }
        if (position_matrix(intersection_table(g, tr.f2)).a != right.a) {
            budget->tick();
            continue;
        }
        for (auto& mu : vecs) {
            budget->tick();
            FqTriple t1{tr.f, g, mu, q};
            if (orbit_invariant(t1) != left) continue;
            FqTriple t2{g, tr.f2, vec_sub(tr.w, mu, q), q};
            if (orbit_invariant(t2) != right) continue;
            ++count;
        }
    }
    return count;
}

/// Class sizes of every orbit on (flags x flags x vectors).
inline std::map<DecoratedMatrix, long long> orbit_census(int n, int d, int q,
                                                         Budget* budget = nullptr,
                                                         int jobs = 1) {
    Budget local;
    if (!budget) budget = &local;
    auto flags = all_flags(n, d, q);
    auto vecs = all_vectors(q, d);
    const long long total = (long long)flags.size() * flags.size() * vecs.size();
    budget->tick(total);

    const int nthreads = std::max(1, jobs);
    std::vector<std::map<DecoratedMatrix, long long>> partial(nthreads);
    auto work = [&](int t) {
        for (size_t i = t; i < flags.size(); i += nthreads)
            for (auto& g : flags)
                for (auto& w : vecs) {
                    FqTriple tr{flags[i], g, w, q};
                    ++partial[t][orbit_invariant(tr)];
                }
    };
    if (nthreads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    std::map<DecoratedMatrix, long long> out;
    for (auto& p : partial)
        for (auto& [k, v] : p) out[k] += v;
    return out;
}

/// Exact Lagrange fit of integer points (x_i, y_i); returns the polynomial in
/// ascending-degree coefficient order.
inline std::vector<Rational> lagrange_fit(const std::vector<std::pair<long long, Int>>& pts) {
    const size_t n = pts.size();
    std::vector<Rational> poly(n, 0);
    for (size_t i = 0; i < n; ++i) {
        std::vector<Rational> term{1};
        Rational denom = 1;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            // term *= (x - x_j)
            std::vector<Rational> next(term.size() + 1, 0);
            for (size_t k = 0; k < term.size(); ++k) {
                next[k + 1] += term[k];
                next[k] -= term[k] * pts[j].first;
            }
            term = std::move(next);
            denom *= Rational(pts[i].first - pts[j].first);
        }
        for (size_t k = 0; k < term.size(); ++k) poly[k] += term[k] * Rational(pts[i].second) / denom;
    }
    while (!poly.empty() && poly.back() == 0) poly.pop_back();
    return poly;
}

inline Rational eval_poly(const std::vector<Rational>& poly, long long x) {
    Rational r = 0;
    for (size_t k = poly.size(); k-- > 0;) r = r * x + poly[k];
    return r;
}

/// Point-count degree fit: counts the orbit over each prime, interpolates the
/// count polynomial in q (the last prime is held out for validation), and
/// returns the degree. The degree must match the combinatorial dimension,
/// which callers check.
inline int orbit_dimension_fit(const DecoratedMatrix& m, const std::vector<int>& primes,
                               Budget* budget = nullptr) {
    if (primes.size() < 2) throw std::invalid_argument("orbit_dimension_fit: need more primes");
    std::vector<std::pair<long long, Int>> pts;
    for (int q : primes) {
        auto census = orbit_census(m.rows, m.total(), q, budget);
        auto it = census.find(m);
        pts.push_back({q, it == census.end() ? Int(0) : Int(it->second)});
    }
    auto holdout = pts.back();
    pts.pop_back();
    auto poly = lagrange_fit(pts);
    if (eval_poly(poly, holdout.first) != Rational(holdout.second))
        throw std::runtime_error("non-polynomial fit");
    for (auto& c : poly)
        if (boost::multiprecision::denominator(c) != 1)
            throw std::runtime_error("non-polynomial fit");
    return poly.empty() ? 0 : int(poly.size()) - 1;
}

/// Generic structure constant recovered from finite-field counts: the counts
/// at each prime are interpolated as a polynomial in q = v^2. The primes
/// beyond the degree bound validate the fit.
inline Laurent structure_constant_interpolated(const DecoratedMatrix& left,
                                               const DecoratedMatrix& right,
                                               const DecoratedMatrix& target,
                                               const std::vector<int>& primes,
                                               Budget* budget = nullptr) {
    const int d = target.total();
    const size_t need = size_t(d) * d + d + 1;
    if (primes.size() <= need - 1)
        throw std::invalid_argument("structure_constant_interpolated: not enough primes");
    std::vector<std::pair<long long, Int>> pts;
    for (size_t i = 0; i < need; ++i)
        pts.push_back({primes[i], Int(convolution_count(left, right, target, primes[i], budget))});
    auto poly = lagrange_fit(pts);
    for (size_t i = need; i < primes.size(); ++i) {
        Int cnt = convolution_count(left, right, target, primes[i], budget);
        if (eval_poly(poly, primes[i]) != Rational(cnt))
            throw std::runtime_error("degree bound too small");
    }
    Laurent out;
    for (size_t k = 0; k < poly.size(); ++k) {
        if (poly[k] == 0) continue;
        if (boost::multiprecision::denominator(poly[k]) != 1)
            throw std::runtime_error("degree bound too small");
        out += Laurent::term(boost::multiprecision::numerator(poly[k]), int(2 * k));
    }
    return out;
}

/// Apply a random invertible map to a triple (for invariance tests).
inline FqTriple random_translate(const FqTriple& tr, std::mt19937_64& rng) {
    const int q = tr.q;
    const int d = int(tr.w.size());
    // random invertible matrix by rejection
    std::vector<std::vector<int>> g;
    while (true) {
        g.assign(d, std::vector<int>(d, 0));
        for (auto& row : g)
            for (auto& x : row) x = int(rng() % q);
        auto copy = g;
        if (fq::rref(copy, q) == d) break;
    }
    auto apply_vec = [&](const std::vector<int>& v) {
        std::vector<int> r(d, 0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) r[i] = fq::normalize(r[i] + (long long)g[i][j] * v[j], q);
        return r;
    };
    auto apply_flag = [&](const FqFlag& f) {
        FqFlag r = f;
        for (auto& s : r.steps) {
            std::vector<std::vector<int>> rows;
            for (auto& b : s.basis) rows.push_back(apply_vec(b));
            s = FqSubspace(q, d, rows);
        }
        return r;
    };
    return FqTriple{apply_flag(tr.f), apply_flag(tr.f2), apply_vec(tr.w), q};
}

} // namespace mirabolic
