#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace mirabolic {

/// Validation mode: `standard` is the finite label set (all entries >= 0,
/// every marked entry > 0); `stable` additionally allows arbitrary integers
/// on the diagonal, and a marked diagonal cell may be <= 0.
enum class LabelMode { standard, stable };

/// A decorated matrix: an integer matrix together with a staircase set of
/// marked cells (1-based, rows strictly increasing, columns strictly
/// decreasing). Rectangular matrices are allowed; the algebra proper uses
/// square ones, the bimodule dictionary uses n x d ones.
struct DecoratedMatrix {
    int rows = 0, cols = 0;
    std::vector<int> a;                          // row-major, rows*cols
    std::vector<std::pair<int, int>> delta;      // sorted by row ascending

    DecoratedMatrix() = default;
    DecoratedMatrix(int r, int c) : rows(r), cols(c), a(size_t(r) * c, 0) {}
    DecoratedMatrix(const std::vector<std::vector<int>>& m,
                    std::vector<std::pair<int, int>> d = {})
        : rows(int(m.size())), cols(m.empty() ? 0 : int(m[0].size())), delta(std::move(d)) {
        for (auto& row : m) {
            if (int(row.size()) != cols) throw std::invalid_argument("ragged matrix");
            a.insert(a.end(), row.begin(), row.end());
        }
        sort_delta();
    }

    static DecoratedMatrix diagonal(const std::vector<int>& d,
                                    std::vector<std::pair<int, int>> delta = {}) {
        DecoratedMatrix m(int(d.size()), int(d.size()));
        for (int i = 0; i < m.rows; ++i) m.at(i + 1, i + 1) = d[i];
        m.delta = std::move(delta);
        m.sort_delta();
        return m;
    }
    static DecoratedMatrix identity(int n, std::vector<std::pair<int, int>> delta = {}) {
        return diagonal(std::vector<int>(n, 1), std::move(delta));
    }

    int& at(int i, int j) { return a[size_t(i - 1) * cols + (j - 1)]; }
    int at(int i, int j) const { return a[size_t(i - 1) * cols + (j - 1)]; }

    bool marked(int i, int j) const {
        for (auto& p : delta)
            if (p.first == i && p.second == j) return true;
        return false;
    }
    /// Index into delta of the pair in row i, or -1.
    int pair_in_row(int i) const {
        for (size_t t = 0; t < delta.size(); ++t)
            if (delta[t].first == i) return int(t);
        return -1;
    }

    int total() const {
        int s = 0;
        for (int x : a) s += x;
        return s;
    }

    void sort_delta() { std::sort(delta.begin(), delta.end()); }

    DecoratedMatrix with_delta(std::vector<std::pair<int, int>> d) const {
        DecoratedMatrix m = *this;
        m.delta = std::move(d);
        m.sort_delta();
        return m;
    }

    /// Add c to entry (i, j).
    DecoratedMatrix plus_unit(int i, int j, int c) const {
        DecoratedMatrix m = *this;
        m.at(i, j) += c;
        return m;
    }

    auto key() const { return std::tie(rows, cols, a, delta); }
    bool operator==(const DecoratedMatrix& o) const { return key() == o.key(); }
    bool operator!=(const DecoratedMatrix& o) const { return key() != o.key(); }
    bool operator<(const DecoratedMatrix& o) const { return key() < o.key(); }

    std::string str() const {
        std::string s = "[";
        for (int i = 1; i <= rows; ++i) {
            s += i == 1 ? "[" : ",[";
            for (int j = 1; j <= cols; ++j) s += (j == 1 ? "" : ",") + std::to_string(at(i, j));
            s += "]";
        }
        s += "]";
        if (!delta.empty()) {
            s += "{";
            for (size_t t = 0; t < delta.size(); ++t)
                s += (t ? " " : "") + std::to_string(delta[t].first) + "," +
                     std::to_string(delta[t].second);
            s += "}";
        }
        return s;
    }
};

struct ValidationResult {
    bool ok = true;
    std::string reason;
    explicit operator bool() const { return ok; }
};

inline ValidationResult validate(const DecoratedMatrix& m, LabelMode mode) {
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) {
            if (m.at(i, j) < 0 && (mode == LabelMode::standard || i != j))
                return {false, "negative entry off the allowed diagonal"};
        }
    int prev_i = 0, prev_j = m.cols + 1;
    for (auto& [i, j] : m.delta) {
        if (i < 1 || i > m.rows || j < 1 || j > m.cols) return {false, "marked cell out of range"};
        if (i <= prev_i) return {false, "marked rows not strictly increasing"};
        if (j >= prev_j) return {false, "marked columns not strictly decreasing"};
        const bool diag_relaxed = (mode == LabelMode::stable && i == j);
        if (!diag_relaxed && m.at(i, j) <= 0) return {false, "marked entry not positive"};
        prev_i = i;
        prev_j = j;
    }
    return {};
}

inline std::vector<int> ro(const DecoratedMatrix& m) {
    std::vector<int> r(m.rows, 0);
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) r[i - 1] += m.at(i, j);
    return r;
}
inline std::vector<int> co(const DecoratedMatrix& m) {
    std::vector<int> c(m.cols, 0);
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) c[j - 1] += m.at(i, j);
    return c;
}

/// Staircase-set comparison: d1 <= d2 iff every cell of d1 is dominated by
/// some cell of d2 (componentwise). A preorder.
inline bool delta_leq(const std::vector<std::pair<int, int>>& d1,
                      const std::vector<std::pair<int, int>>& d2) {
    for (auto& [i, j] : d1) {
        bool dominated = false;
        for (auto& [k, l] : d2)
            if (i <= k && j <= l) { dominated = true; break; }
        if (!dominated) return false;
    }
    return true;
}

/// True when the single cell (i, j) is dominated by the marked set of m.
inline bool cell_leq_delta(int i, int j, const DecoratedMatrix& m) {
    return delta_leq({{i, j}}, m.delta);
}

struct DimStats {
    long long orbit_dim = 0;      // d(A, Delta)
    long long projection_dim = 0; // r(A, Delta)
};

inline DimStats dim_stats(const DecoratedMatrix& m) {
    DimStats s;
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) {
            if (m.at(i, j) == 0) continue;
            for (int k = 1; k <= m.rows; ++k)
                for (int l = 1; l <= m.cols; ++l)
                    if (i < k || j < l) s.orbit_dim += (long long)m.at(i, j) * m.at(k, l);
            if (cell_leq_delta(i, j, m)) s.orbit_dim += m.at(i, j);
        }
    auto r = ro(m);
    for (size_t i = 0; i < r.size(); ++i)
        for (size_t k = i + 1; k < r.size(); ++k) s.projection_dim += (long long)r[i] * r[k];
    return s;
}

/// d(A, Delta) - r(A, Delta): the exponent relating the e- and normalized bases.
inline long long dim_excess(const DecoratedMatrix& m) {
    auto s = dim_stats(m);
    return s.orbit_dim - s.projection_dim;
}

/// Corner-sum order on matrices with equal margins, extended to decorated
/// matrices by the staircase-set comparison as a tie-break.
inline bool matrix_leq(const DecoratedMatrix& a, const DecoratedMatrix& b) {
    for (int i = 1; i <= a.rows; ++i)
        for (int j = i + 1; j <= a.cols; ++j) {
            long long sa = 0, sb = 0;
            for (int r = 1; r <= i; ++r)
                for (int s = j; s <= a.cols; ++s) { sa += a.at(r, s); sb += b.at(r, s); }
            if (sa > sb) return false;
        }
    for (int i = 2; i <= a.rows; ++i)
        for (int j = 1; j < i && j <= a.cols; ++j) {
            long long sa = 0, sb = 0;
            for (int r = i; r <= a.rows; ++r)
                for (int s = 1; s <= j; ++s) { sa += a.at(r, s); sb += b.at(r, s); }
            if (sa > sb) return false;
        }
    return true;
}

inline bool decorated_leq(const DecoratedMatrix& m1, const DecoratedMatrix& m2) {
    if (m1.rows != m2.rows || m1.cols != m2.cols || ro(m1) != ro(m2) || co(m1) != co(m2))
        throw std::invalid_argument("decorated_leq: mismatched margins");
    if (m1.a == m2.a) return delta_leq(m1.delta, m2.delta);
    return matrix_leq(m1, m2) && !matrix_leq(m2, m1);
}

inline DecoratedMatrix transpose(const DecoratedMatrix& m) {
    DecoratedMatrix t(m.cols, m.rows);
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) t.at(j, i) = m.at(i, j);
    for (auto& [i, j] : m.delta) t.delta.push_back({j, i});
    t.sort_delta();
    return t;
}

/// Shift of the diagonal: A + p*I, marks unchanged.
inline DecoratedMatrix shift_diagonal(const DecoratedMatrix& m, int p) {
    DecoratedMatrix r = m;
    for (int i = 1; i <= std::min(m.rows, m.cols); ++i) r.at(i, i) += p;
    return r;
}

/// All valid staircase mark sets for the given matrix under the given mode.
inline std::vector<std::vector<std::pair<int, int>>>
all_decorations(const DecoratedMatrix& m, LabelMode mode) {
    std::vector<std::pair<int, int>> cells;
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j) {
            const bool markable =
                m.at(i, j) > 0 || (mode == LabelMode::stable && i == j);
            if (markable) cells.push_back({i, j});
        }
    std::vector<std::vector<std::pair<int, int>>> out;
    std::vector<std::pair<int, int>> cur;
    std::function<void(size_t)> rec = [&](size_t start) {
        out.push_back(cur);
        for (size_t t = start; t < cells.size(); ++t) {
            auto [i, j] = cells[t];
            if (!cur.empty() && (i <= cur.back().first || j >= cur.back().second)) continue;
            cur.push_back(cells[t]);
            rec(t + 1);
            cur.pop_back();
        }
    };
    rec(0);
    std::sort(out.begin(), out.end());
    return out;
}

/// All square labels of size n with entry sum d, in lexicographic order on
/// the flattened matrix and then on the mark set.
inline std::vector<DecoratedMatrix> enumerate_labels(int n, int d, bool diagonal_only = false) {
    if (n < 1 || d < 0) throw std::invalid_argument("enumerate_labels: bad arguments");
    std::vector<DecoratedMatrix> out;
    DecoratedMatrix m(n, n);
    std::function<void(int, int)> rec = [&](int cell, int rem) {
        const int ncell = n * n;
        if (cell == ncell) {
            if (rem != 0) return;
            if (diagonal_only) {
                out.push_back(m);
            } else {
                for (auto& d2 : all_decorations(m, LabelMode::standard))
                    out.push_back(m.with_delta(d2));
            }
            return;
        }
        const int i = cell / n + 1, j = cell % n + 1;
        const bool allowed = !diagonal_only || i == j;
        const int hi = allowed ? rem : 0;
        for (int x = 0; x <= hi; ++x) {
            m.at(i, j) = x;
            rec(cell + 1, rem - x);
        }
        m.at(i, j) = 0;
    };
    rec(0, d);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace mirabolic
