#pragma once

#include "mirabolic/element.hpp"

#include <cassert>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mirabolic {

/// Shape of an admissible left factor: a diagonal matrix, a diagonal with one
/// marked diagonal cell, or diagonal + R times a single off-diagonal unit in
/// rows (h, h+1).
struct LeftShape {
    enum class Kind { diagonal, diag_marked, raise, lower } kind;
    int h = 0; // active row (raise/lower: acts on rows h, h+1; diag_marked: marked row)
    int R = 0; // off-diagonal multiplicity
};

inline LeftShape classify_left(const DecoratedMatrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("unsupported left factor");
    int oi = 0, oj = 0, ov = 0;
    for (int i = 1; i <= m.rows; ++i)
        for (int j = 1; j <= m.cols; ++j)
            if (i != j && m.at(i, j) != 0) {
                if (ov != 0) throw std::invalid_argument("unsupported left factor");
                oi = i;
                oj = j;
                ov = m.at(i, j);
            }
    if (ov == 0) {
        if (m.delta.empty()) return {LeftShape::Kind::diagonal, 0, 0};
        if (m.delta.size() == 1 && m.delta[0].first == m.delta[0].second)
            return {LeftShape::Kind::diag_marked, m.delta[0].first, 0};
        throw std::invalid_argument("unsupported left factor");
    }
    if (!m.delta.empty() || ov < 0) throw std::invalid_argument("unsupported left factor");
    if (oj == oi + 1) return {LeftShape::Kind::raise, oi, ov};
    if (oi == oj + 1) return {LeftShape::Kind::lower, oj, ov};
    throw std::invalid_argument("unsupported left factor");
}

namespace detail {

inline long long rowsum(const DecoratedMatrix& a, int row, int jlo, int jhi) {
    long long s = 0;
    for (int j = std::max(1, jlo); j <= std::min(a.cols, jhi); ++j) s += a.at(row, j);
    return s;
}

/// Output collector that drops labels whose only defect is a non-positive
/// marked entry (empty orbit) and loudly rejects malformed staircases.
inline void emit(Element& out, const DecoratedMatrix& label, const Laurent& coeff,
                 LabelMode mode) {
    if (coeff.is_zero()) return;
    auto v = validate(label, mode);
    if (!v.ok) {
        if (v.reason == "marked entry not positive") return;
        throw std::logic_error("kernel produced malformed label: " + v.reason + " " + label.str());
    }
    out.add(label, coeff);
}

/// Columns of the pairs at and after the row-h pair, with 0 sentinels.
struct MarkContext {
    int iu = -1;  // index in delta of the pair in row h
    int id = -1;  // index in delta of the pair in row h+1
    int jm = 0, jm1 = 0, jm2 = 0;
};

inline std::vector<std::pair<int, int>> without_cell(std::vector<std::pair<int, int>> d,
                                                     std::pair<int, int> cell) {
    d.erase(std::remove(d.begin(), d.end(), cell), d.end());
    return d;
}
inline std::vector<std::pair<int, int>> with_cell(std::vector<std::pair<int, int>> d,
                                                  std::pair<int, int> cell) {
    d.push_back(cell);
    std::sort(d.begin(), d.end());
    return d;
}
inline std::vector<std::pair<int, int>> replace_cell(std::vector<std::pair<int, int>> d,
                                                     std::pair<int, int> oldc,
                                                     std::pair<int, int> newc) {
    return with_cell(without_cell(std::move(d), oldc), newc);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Characteristic-function (e-basis) kernels, single off-diagonal step.
// ---------------------------------------------------------------------------

/// e_{B} * e_{A,D} for B = diagonal + E_{h,h+1}. Case split on how the mark
/// set meets rows h and h+1.
inline void mul_term_e_raise(Element& out, int h, const DecoratedMatrix& A, const Laurent& c,
                             LabelMode mode) {
    using detail::rowsum;
    const int n = A.cols;
    const int iu = A.pair_in_row(h), id = A.pair_in_row(h + 1);
    const int k = int(A.delta.size());

    auto acoeff = [&](int p) {
        return Laurent::v(int(2 * rowsum(A, h, p + 1, n))) * qbinom(A.at(h, p) + 1, 1);
    };
    auto X = [&](int p) { return A.plus_unit(h, p, 1).plus_unit(h + 1, p, -1); };

    if (iu < 0 && id < 0) {
        for (int p = 1; p <= n; ++p)
            if (A.at(h + 1, p) >= 1) detail::emit(out, X(p), c * acoeff(p), mode);
        return;
    }
    if (iu >= 0 && id < 0) {
        const int jm = A.delta[iu].second;
        const int jm1 = iu + 1 < k ? A.delta[iu + 1].second : 0;
        for (int p = 1; p <= n; ++p) {
            if (A.at(h + 1, p) < 1) continue;
            Laurent coeff;
            if (p <= jm1 || p > jm)
                coeff = acoeff(p);
            else if (p < jm)
                coeff = Laurent::v(int(2 * (rowsum(A, h, p + 1, n) - 1))) * qbinom(A.at(h, p) + 1, 1);
            else
                coeff = Laurent::v(int(2 * rowsum(A, h, p + 1, n))) * qbinom(A.at(h, p), 1);
            detail::emit(out, X(p), c * coeff, mode);
        }
        return;
    }
    if (iu < 0 && id >= 0) {
        const int jm = A.delta[id].second;
        const int jm1 = id + 1 < k ? A.delta[id + 1].second : 0;
        for (int p = 1; p <= n; ++p)
            if (A.at(h + 1, p) >= 1) detail::emit(out, X(p), c * acoeff(p), mode);
        if (A.at(h + 1, jm) >= 1) {
            const Laurent coeff = Laurent::v(int(2 * rowsum(A, h, jm, n)));
            auto dc = detail::replace_pair(A.delta, id, {h, jm});
            detail::emit(out, X(jm).with_delta(dc), c * coeff, mode);
            for (int t = jm1 + 1; t < jm; ++t)
                detail::emit(out, X(jm).with_delta(detail::insert_pair(dc, {h + 1, t})), c * coeff,
                             mode);
        }
        return;
    }
    // both rows marked; staircase forces id == iu + 1
    const int jm = A.delta[iu].second;
    const int jm1 = A.delta[id].second;
    const int jm2 = id + 1 < k ? A.delta[id + 1].second : 0;
    for (int p = 1; p <= n; ++p) {
        if (A.at(h + 1, p) < 1) continue;
        Laurent coeff;
        if (p <= jm1 || p > jm)
            coeff = acoeff(p);
        else if (p < jm)
            coeff = Laurent::v(int(2 * (rowsum(A, h, p + 1, n) - 1))) * qbinom(A.at(h, p) + 1, 1);
        else
            coeff = Laurent::v(int(2 * rowsum(A, h, p + 1, n))) * qbinom(A.at(h, p), 1);
        detail::emit(out, X(p), c * coeff, mode);
    }
    if (A.at(h + 1, jm1) >= 1) {
        const Laurent coeff = Laurent::v(int(2 * rowsum(A, h, jm1, n))) -
                              Laurent::v(int(2 * (rowsum(A, h, jm1 + 1, n) - 1)));
        auto ds = detail::erase_pair(A.delta, id);
        detail::emit(out, X(jm1).with_delta(ds), c * coeff, mode);
        for (int t = jm2 + 1; t < jm1; ++t)
            detail::emit(out, X(jm1).with_delta(detail::insert_pair(ds, {h + 1, t})), c * coeff,
                         mode);
    }
}

/// e_{C} * e_{A,D} for C = diagonal + E_{h+1,h}.
inline void mul_term_e_lower(Element& out, int h, const DecoratedMatrix& A, const Laurent& c,
                             LabelMode mode) {
    using detail::rowsum;
    const int n = A.cols;
    const int iu = A.pair_in_row(h), id = A.pair_in_row(h + 1);
    const int k = int(A.delta.size());

    auto acoeff = [&](int p) {
        return Laurent::v(int(2 * rowsum(A, h + 1, 1, p - 1))) * qbinom(A.at(h + 1, p) + 1, 1);
    };
    auto X = [&](int p) { return A.plus_unit(h, p, -1).plus_unit(h + 1, p, 1); };

    if (iu < 0 && id < 0) {
        for (int p = 1; p <= n; ++p)
            if (A.at(h, p) >= 1) detail::emit(out, X(p), c * acoeff(p), mode);
        return;
    }
    if (iu >= 0 && id < 0) {
        const int jm = A.delta[iu].second;
        const int jm1 = iu + 1 < k ? A.delta[iu + 1].second : 0;
        for (int p = 1; p <= n; ++p)
            if (A.at(h, p) >= 1) detail::emit(out, X(p), c * acoeff(p), mode);
        const Laurent side = Laurent::v(int(2 * rowsum(A, h + 1, 1, jm1)));
        for (int t = jm1 + 1; t < jm; ++t) {
            if (A.at(h, t) < 1) continue;
            auto dt = detail::insert_pair(A.delta, {h + 1, t});
            detail::emit(out, X(t).with_delta(dt), c * side, mode);
        }
        if (A.at(h, jm) >= 1) {
            auto db = detail::replace_pair(A.delta, iu, {h + 1, jm});
            detail::emit(out, X(jm).with_delta(db), c * side, mode);
        }
        return;
    }
    if (iu < 0 && id >= 0) {
        const int jm = A.delta[id].second;
        for (int p = 1; p <= n; ++p) {
            if (A.at(h, p) < 1) continue;
            Laurent coeff = p == jm ? Laurent::v(int(2 * (rowsum(A, h + 1, 1, p - 1) + 1))) *
                                          qbinom(A.at(h + 1, p), 1)
                                    : acoeff(p);
            detail::emit(out, X(p), c * coeff, mode);
        }
        return;
    }
    const int jm = A.delta[iu].second;
    const int jm1 = A.delta[id].second;
    for (int p = 1; p <= n; ++p) {
        if (A.at(h, p) < 1) continue;
        Laurent coeff = p == jm1 ? Laurent::v(int(2 * (rowsum(A, h + 1, 1, p - 1) + 1))) *
                                       qbinom(A.at(h + 1, p), 1)
                                 : acoeff(p);
        detail::emit(out, X(p), c * coeff, mode);
    }
    const Laurent side = Laurent::v(int(2 * rowsum(A, h + 1, 1, jm1))) -
                         Laurent::v(int(2 * rowsum(A, h + 1, 1, jm1 - 1)));
    if (A.at(h, jm) >= 1) {
        auto ds = detail::erase_pair(detail::replace_pair(A.delta, iu, {h + 1, jm}), id);
        detail::emit(out, X(jm).with_delta(ds), c * side, mode);
    }
    for (int t = jm1 + 1; t < jm; ++t) {
        if (A.at(h, t) < 1) continue;
        auto dt = detail::replace_pair(A.delta, id, {h + 1, t});
        detail::emit(out, X(t).with_delta(dt), c * side, mode);
    }
}

namespace detail {

/// Case analysis shared by the diagonal-marking kernels: how the mark set of
/// A meets row h. Case a: some pair strictly above row h, none at h. Case b:
/// a pair at row h. Case c: all pairs strictly below h. Case d: empty.
enum class MarkCase { above, at_row, below, empty };

inline MarkCase mark_case(const DecoratedMatrix& A, int h, int& m_index) {
    m_index = -1;
    if (A.delta.empty()) return MarkCase::empty;
    const int at = A.pair_in_row(h);
    if (at >= 0) {
        m_index = at;
        return MarkCase::at_row;
    }
    for (size_t t = 0; t < A.delta.size(); ++t)
        if (A.delta[t].first > h) {
            m_index = int(t);
            return MarkCase::above;
        }
    return MarkCase::below;
}

/// Output mark sets for the diagonal-marking product: all valid mark sets of
/// A that agree with the input strictly above row h, with new pairs only in
/// rows <= h; when nothing of the input lies at or above row h, a row-h pair
/// is forced (the extra vector cannot be absorbed upward).
inline std::vector<std::vector<std::pair<int, int>>>
marking_targets(const DecoratedMatrix& A, int h, LabelMode mode) {
    int mi = -1;
    const MarkCase mc = mark_case(A, h, mi);
    std::vector<std::pair<int, int>> upper;
    for (auto& p : A.delta)
        if (p.first > h) upper.push_back(p);
    std::vector<std::vector<std::pair<int, int>>> out;
    for (auto& cand : all_decorations(A, mode)) {
        std::vector<std::pair<int, int>> cu;
        for (auto& p : cand)
            if (p.first > h) cu.push_back(p);
        if (cu != upper) continue;
        bool has_h = false;
        bool ok = true;
        for (auto& p : cand) {
            if (p.first == h) has_h = true;
            if (p.first < h && !A.marked(p.first, p.second)) {
                // new pairs in rows < h are allowed (they are cancelled by the
                // extra vector); nothing to check here
            }
        }
        if ((mc == MarkCase::below || mc == MarkCase::empty) && !has_h) ok = false;
        if (ok) out.push_back(cand);
    }
    return out;
}

} // namespace detail

/// e_{D,{(h,h)}} * e_{A,D} for a diagonal D.
inline void mul_term_e_mark(Element& out, int h, const DecoratedMatrix& A, const Laurent& c,
                            LabelMode mode) {
    using detail::rowsum;
    int mi = -1;
    const auto mc = detail::mark_case(A, h, mi);

    auto block = [&](int ilo, int ihi, int jlo, int jhi) {
        long long s = 0;
        for (int i = std::max(1, ilo); i <= std::min(A.rows, ihi); ++i)
            s += rowsum(A, i, jlo, jhi);
        return s;
    };

    for (auto& target : detail::marking_targets(A, h, mode)) {
        auto in_target = [&](std::pair<int, int> cell) {
            return std::find(target.begin(), target.end(), cell) != target.end();
        };
        Laurent coeff(1);
        const int theta_upto = mc == detail::MarkCase::at_row ? mi
                               : mc == detail::MarkCase::above ? mi - 1
                                                               : int(A.delta.size()) - 1;
        int prev_row = 0;
        for (int t = 0; t <= theta_upto; ++t) {
            auto [ip, jp] = A.delta[size_t(t)];
            const long long s1 = block(prev_row + 1, ip - 1, 1, jp);
            if (in_target({ip, jp})) {
                coeff *= Laurent::v(int(2 * s1)) *
                         (Laurent::v(int(2 * rowsum(A, ip, 1, jp))) - Laurent(2));
            } else {
                coeff *= Laurent::v(int(2 * (s1 + rowsum(A, ip, 1, jp - 1)))) *
                         (Laurent::v(int(2 * A.at(ip, jp))) - Laurent(1));
            }
            prev_row = ip;
        }
        if (mc == detail::MarkCase::above) {
            const auto [im, jm] = A.delta[size_t(mi)];
            (void)im;
            const int prev = mi > 0 ? A.delta[size_t(mi) - 1].first : 0;
            bool has_h = false;
            for (auto& p : target)
                if (p.first == h) has_h = true;
            if (has_h) {
                coeff *= Laurent::v(int(2 * block(prev + 1, h, 1, jm)));
            } else {
                coeff *= Laurent::v(int(2 * block(prev + 1, h - 1, 1, jm))) *
                         (Laurent::v(int(2 * rowsum(A, h, 1, jm))) - Laurent(1));
            }
        }
        detail::emit(out, A.with_delta(target), c * coeff, mode);
    }
}

inline Laurent one_minus_vpow(int e) { return Laurent(1) - Laurent::v(e); }

/// Normalized-basis counterpart of mul_term_e_mark.
inline void mul_term_br_mark(Element& out, int h, const DecoratedMatrix& A, const Laurent& c,
                             LabelMode mode) {
    using detail::rowsum;
    int mi = -1;
    const auto mc = detail::mark_case(A, h, mi);

    auto block = [&](int ilo, int ihi, int jlo, int jhi) {
        long long s = 0;
        for (int i = std::max(1, ilo); i <= std::min(A.rows, ihi); ++i)
            s += rowsum(A, i, jlo, jhi);
        return s;
    };
    auto weight = [&](const std::vector<std::pair<int, int>>& d) {
        long long s = 0;
        for (int i = 1; i <= A.rows; ++i)
            for (int j = 1; j <= A.cols; ++j)
                if (delta_leq({{i, j}}, d)) s += A.at(i, j);
        return s;
    };

    if (mc == detail::MarkCase::empty) {
        for (int t = 1; t <= A.cols; ++t) {
            const bool markable = A.at(h, t) > 0 || (mode == LabelMode::stable && t == h);
            if (!markable) continue;
            const Laurent coeff = Laurent::v(int(-block(1, h, t + 1, A.cols)));
            detail::emit(out, A.with_delta({{h, t}}), c * coeff, mode);
        }
        return;
    }

    const long long wA = weight(A.delta);
    for (auto& target : detail::marking_targets(A, h, mode)) {
        auto in_target = [&](std::pair<int, int> cell) {
            return std::find(target.begin(), target.end(), cell) != target.end();
        };
        Laurent coeff = Laurent::v(int(weight(target) - wA));
        const int theta_upto = mc == detail::MarkCase::at_row ? mi
                               : mc == detail::MarkCase::above ? mi - 1
                                                               : int(A.delta.size()) - 1;
        int prev_row = 0;
        for (int t = 0; t <= theta_upto; ++t) {
            auto [ip, jp] = A.delta[size_t(t)];
            const long long gamma = block(prev_row + 1, ip, 1, jp) -
                                    block(prev_row + 1, ip, jp + 1, A.cols);
            if (in_target({ip, jp})) {
                coeff *= Laurent::v(int(gamma)) *
                         (Laurent(1) - Laurent(2) * Laurent::v(int(-2 * rowsum(A, ip, 1, jp))));
            } else {
                coeff *= Laurent::v(int(gamma)) * one_minus_vpow(int(-2 * A.at(ip, jp)));
            }
            prev_row = ip;
        }
        if (mc == detail::MarkCase::above) {
            const int jm = A.delta[size_t(mi)].second;
            const int prev = mi > 0 ? A.delta[size_t(mi) - 1].first : 0;
            bool has_h = false;
            for (auto& p : target)
                if (p.first == h) has_h = true;
            const long long e = block(prev + 1, h, 1, jm) - block(prev + 1, h, jm + 1, A.cols);
            coeff *= Laurent::v(int(e));
            if (!has_h) coeff *= one_minus_vpow(int(-2 * rowsum(A, h, 1, jm)));
        }
        if (mc == detail::MarkCase::below) {
            const int ik = A.delta.back().first;
            coeff *= Laurent::v(int(-block(ik + 1, h, 1, A.cols)));
        }
        detail::emit(out, A.with_delta(target), c * coeff, mode);
    }
}

namespace detail {

/// Compositions of R into n nonnegative parts.
inline std::vector<std::vector<int>> compositions(int R, int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(n, 0);
    std::function<void(int, int)> rec = [&](int i, int rem) {
        if (i == n - 1) {
            cur[size_t(i)] = rem;
            out.push_back(cur);
            return;
        }
        for (int x = 0; x <= rem; ++x) {
            cur[size_t(i)] = x;
            rec(i + 1, rem - x);
        }
    };
    if (n == 0) {
        if (R == 0) out.push_back({});
        return out;
    }
    rec(0, R);
    return out;
}

} // namespace detail

/// [B] * [A]_D for B = diagonal + R*E_{h,h+1}, in the normalized basis. In
/// stable mode the part of the step landing on the diagonal of row h+1 is
/// unconstrained.
inline void mul_term_br_raise(Element& out, int h, int R, const DecoratedMatrix& A,
                              const Laurent& c, LabelMode mode) {
    using detail::rowsum;
    const int n = A.cols;
    const int iu = A.pair_in_row(h), id = A.pair_in_row(h + 1);
    const int k = int(A.delta.size());

    auto beta = [&](int u) { return rowsum(A, h, u, n) - rowsum(A, h + 1, u + 1, n); };

    for (auto& p : detail::compositions(R, n)) {
        bool ok = true;
        long long kappa = 0;
        for (int u = 1; u <= n && ok; ++u) {
            if (p[size_t(u - 1)] == 0) continue;
            if (A.at(h + 1, u) < p[size_t(u - 1)] && !(mode == LabelMode::stable && u == h + 1))
                ok = false;
            kappa += p[size_t(u - 1)] * beta(u);
        }
        if (!ok) continue;
        for (int u = 1; u <= n; ++u)
            for (int u2 = u + 1; u2 <= n; ++u2) kappa += (long long)p[size_t(u - 1)] * p[size_t(u2 - 1)];
        DecoratedMatrix X = A;
        for (int u = 1; u <= n; ++u) {
            X.at(h, u) += p[size_t(u - 1)];
            X.at(h + 1, u) -= p[size_t(u - 1)];
        }
        auto pu = [&](int u) { return p[size_t(u - 1)]; };
        auto bracket_prod = [&](int deltarow_col, bool lower_both) {
            Laurent r(1);
            for (int u = 1; u <= n; ++u) {
                const int d1 = (u == deltarow_col) ? 1 : 0;
                r *= qbinom(A.at(h, u) + pu(u) - d1, pu(u) - (lower_both ? d1 : 0)).bar();
            }
            return r;
        };

        if (iu < 0 && id < 0) {
            detail::emit(out, X, c * Laurent::v(int(kappa)) * bracket_prod(0, false), mode);
            continue;
        }
        if (iu >= 0 && id < 0) {
            const int jm = A.delta[iu].second;
            const int jm1 = iu + 1 < k ? A.delta[iu + 1].second : 0;
            long long corr = 0;
            for (int u = jm1 + 1; u <= jm; ++u) corr += pu(u);
            detail::emit(out, X, c * Laurent::v(int(kappa - corr)) * bracket_prod(jm, false), mode);
            continue;
        }
        if (iu < 0 && id >= 0) {
            const int jm = A.delta[id].second;
            const int jm1 = id + 1 < k ? A.delta[id + 1].second : 0;
            detail::emit(out, X, c * Laurent::v(int(kappa)) * bracket_prod(0, false), mode);
            if (pu(jm) > 0) {
                auto tail = [&](int from) {
                    long long s = 0;
                    for (int j = from + 1; j <= jm; ++j) s += A.at(h + 1, j) - pu(j);
                    return s;
                };
                auto dc = detail::replace_pair(A.delta, id, {h, jm});
                detail::emit(out, X.with_delta(dc),
                             c * Laurent::v(int(kappa - tail(jm1))) * bracket_prod(jm, true), mode);
                for (int t = jm1 + 1; t < jm; ++t)
                    detail::emit(out, X.with_delta(detail::insert_pair(dc, {h + 1, t})),
                                 c * Laurent::v(int(kappa - tail(t))) * bracket_prod(jm, true),
                                 mode);
            }
            continue;
        }
        const int jm = A.delta[iu].second;
        const int jm1 = A.delta[id].second;
        const int jm2 = id + 1 < k ? A.delta[id + 1].second : 0;
        {
            long long corr = 0;
            for (int u = jm1 + 1; u <= jm; ++u) corr += pu(u);
            detail::emit(out, X, c * Laurent::v(int(kappa - corr)) * bracket_prod(jm, false), mode);
        }
        if (pu(jm1) > 0) {
            auto tail = [&](int from) {
                long long s = 0;
                for (int j = from + 1; j <= jm1; ++j) s += A.at(h + 1, j) - pu(j);
                return s;
            };
            const Laurent fac = one_minus_vpow(-2 * pu(jm1));
            auto ds = detail::erase_pair(A.delta, id);
            detail::emit(out, X.with_delta(ds),
                         c * Laurent::v(int(kappa - tail(jm2))) * fac * bracket_prod(0, false),
                         mode);
            for (int t = jm2 + 1; t < jm1; ++t)
                detail::emit(out, X.with_delta(detail::insert_pair(ds, {h + 1, t})),
                             c * Laurent::v(int(kappa - tail(t))) * fac * bracket_prod(0, false),
                             mode);
        }
    }
}

/// [C] * [A]_D for C = diagonal + R*E_{h+1,h}, in the normalized basis.
inline void mul_term_br_lower(Element& out, int h, int R, const DecoratedMatrix& A,
                              const Laurent& c, LabelMode mode) {
    using detail::rowsum;
    const int n = A.cols;
    const int iu = A.pair_in_row(h), id = A.pair_in_row(h + 1);
    const int k = int(A.delta.size());

    auto betap = [&](int u) { return rowsum(A, h + 1, 1, u) - rowsum(A, h, 1, u - 1); };

    for (auto& p : detail::compositions(R, n)) {
        bool ok = true;
        long long kappa = 0;
        for (int u = 1; u <= n && ok; ++u) {
            if (p[size_t(u - 1)] == 0) continue;
            if (A.at(h, u) < p[size_t(u - 1)] && !(mode == LabelMode::stable && u == h)) ok = false;
            kappa += p[size_t(u - 1)] * betap(u);
        }
        if (!ok) continue;
        for (int u = 1; u <= n; ++u)
            for (int u2 = u + 1; u2 <= n; ++u2) kappa += (long long)p[size_t(u - 1)] * p[size_t(u2 - 1)];
        DecoratedMatrix X = A;
        for (int u = 1; u <= n; ++u) {
            X.at(h, u) -= p[size_t(u - 1)];
            X.at(h + 1, u) += p[size_t(u - 1)];
        }
        auto pu = [&](int u) { return p[size_t(u - 1)]; };
        auto bracket_prod = [&](int deltarow_col, bool lower_both) {
            Laurent r(1);
            for (int u = 1; u <= n; ++u) {
                const int d1 = (u == deltarow_col) ? 1 : 0;
                r *= qbinom(A.at(h + 1, u) + pu(u) - d1, pu(u) - (lower_both ? d1 : 0)).bar();
            }
            return r;
        };

        if (iu < 0 && id < 0) {
            detail::emit(out, X, c * Laurent::v(int(kappa)) * bracket_prod(0, false), mode);
            continue;
        }
        if (iu >= 0 && id < 0) {
            const int jm = A.delta[iu].second;
            const int jm1 = iu + 1 < k ? A.delta[iu + 1].second : 0;
            long long corr = 0;
            for (int u = jm1 + 1; u <= jm; ++u) corr += pu(u);
            detail::emit(out, X, c * Laurent::v(int(kappa - corr)) * bracket_prod(0, false), mode);
            if (pu(jm) > 0) {
                auto db = detail::replace_pair(A.delta, iu, {h + 1, jm});
                detail::emit(out, X.with_delta(db),
                             c * Laurent::v(int(kappa - rowsum(A, h + 1, jm1 + 1, jm))) *
                                 bracket_prod(jm, true),
                             mode);
            }
            for (int t = jm1 + 1; t < jm; ++t) {
                if (pu(t) <= 0) continue;
                auto dt = detail::insert_pair(A.delta, {h + 1, t});
                detail::emit(out, X.with_delta(dt),
                             c * Laurent::v(int(kappa - rowsum(A, h + 1, jm1 + 1, t))) *
                                 [&] {
                                     Laurent r(1);
                                     for (int u = 1; u <= n; ++u) {
                                         const int d1 = (u == t) ? 1 : 0;
                                         r *= qbinom(A.at(h + 1, u) + pu(u) - d1, pu(u) - d1).bar();
                                     }
                                     return r;
                                 }(),
                             mode);
            }
            continue;
        }
        if (iu < 0 && id >= 0) {
            const int jm = A.delta[id].second;
            detail::emit(out, X, c * Laurent::v(int(kappa)) * bracket_prod(jm, false), mode);
            continue;
        }
        const int jm = A.delta[iu].second;
        const int jm1 = A.delta[id].second;
        detail::emit(out, X, c * Laurent::v(int(kappa)) * bracket_prod(jm1, false), mode);
        const Laurent fac = one_minus_vpow(-2 * A.at(h + 1, jm1));
        auto kappa_at = [&](int x) { return kappa - rowsum(A, h + 1, x + 1, jm); };
        if (pu(jm) > 0) {
            auto ds = detail::erase_pair(detail::replace_pair(A.delta, iu, {h + 1, jm}), id);
            detail::emit(out, X.with_delta(ds),
                         c * Laurent::v(int(kappa_at(jm1))) * fac * bracket_prod(jm, true), mode);
        }
        for (int t = jm1 + 1; t < jm; ++t) {
            if (pu(t) <= 0) continue;
            auto dt = detail::replace_pair(A.delta, id, {h + 1, t});
            Laurent br(1);
            for (int u = 1; u <= n; ++u) {
                const int d1 = (u == t) ? 1 : 0;
                br *= qbinom(A.at(h + 1, u) + pu(u) - d1, pu(u) - d1).bar();
            }
            detail::emit(out, X.with_delta(dt), c * Laurent::v(int(kappa_at(t))) * fac * br, mode);
        }
    }
}

// ---------------------------------------------------------------------------
// Element-level products.
// ---------------------------------------------------------------------------

/// Diagnostic counters (margin-mismatch drops in word application).
struct Diagnostics {
    long long dropped_terms = 0;
};
inline Diagnostics& diagnostics() {
    static thread_local Diagnostics d;
    return d;
}

/// left * x in the e-basis; left must be diagonal, diagonal-marked, or a
/// single raise/lower step (R = 1).
inline Element mul_e(const DecoratedMatrix& left, const Element& x) {
    const LeftShape shape = classify_left(left);
    if ((shape.kind == LeftShape::Kind::raise || shape.kind == LeftShape::Kind::lower) &&
        shape.R != 1)
        throw std::invalid_argument("unsupported left factor");
    Element out(x.rows, x.cols, x.degree, Basis::e, x.mode);
    const auto lc = co(left);
    for (auto& [A, c] : x.terms) {
        if (ro(A) != lc) {
            ++diagnostics().dropped_terms;
            continue;
        }
        switch (shape.kind) {
        case LeftShape::Kind::diagonal: out.add(A, c); break;
        case LeftShape::Kind::diag_marked: mul_term_e_mark(out, shape.h, A, c, x.mode); break;
        case LeftShape::Kind::raise: mul_term_e_raise(out, shape.h, A, c, x.mode); break;
        case LeftShape::Kind::lower: mul_term_e_lower(out, shape.h, A, c, x.mode); break;
        }
    }
    return out;
}

/// left * x in the normalized basis (any divided power R >= 0).
inline Element mul_bracket(const DecoratedMatrix& left, const Element& x) {
    const LeftShape shape = classify_left(left);
    Element out(x.rows, x.cols, x.degree, Basis::bracket, x.mode);
    const auto lc = co(left);
    for (auto& [A, c] : x.terms) {
        if (ro(A) != lc) {
            ++diagnostics().dropped_terms;
            continue;
        }
        switch (shape.kind) {
        case LeftShape::Kind::diagonal: out.add(A, c); break;
        case LeftShape::Kind::diag_marked: mul_term_br_mark(out, shape.h, A, c, x.mode); break;
        case LeftShape::Kind::raise: mul_term_br_raise(out, shape.h, shape.R, A, c, x.mode); break;
        case LeftShape::Kind::lower: mul_term_br_lower(out, shape.h, shape.R, A, c, x.mode); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generators as finite sums over diagonal completions.
// ---------------------------------------------------------------------------

struct Gen {
    enum class Kind { E, F, Hplus, Hminus, L, Raise, Lower, DiagMark };
    Kind kind;
    int index = 0; // i for E/F/Raise/Lower, a for H, h for DiagMark
    int power = 1; // divided power for Raise/Lower

    static Gen E(int i) { return {Kind::E, i, 1}; }
    static Gen F(int i) { return {Kind::F, i, 1}; }
    static Gen Hplus(int a) { return {Kind::Hplus, a, 1}; }
    static Gen Hminus(int a) { return {Kind::Hminus, a, 1}; }
    static Gen L() { return {Kind::L, 0, 1}; }

    std::string str() const {
        switch (kind) {
        case Kind::E: return "E" + std::to_string(index);
        case Kind::F: return "F" + std::to_string(index);
        case Kind::Hplus: return "H+" + std::to_string(index);
        case Kind::Hminus: return "H-" + std::to_string(index);
        case Kind::L: return "L";
        case Kind::Raise: return "B" + std::to_string(index) + "^" + std::to_string(power);
        case Kind::Lower: return "C" + std::to_string(index) + "^" + std::to_string(power);
        case Kind::DiagMark: return "Dd" + std::to_string(index);
        }
        return "?";
    }
};

namespace detail {

/// Per-term application of a generator in the normalized basis. The diagonal
/// completion of the left factor is forced by the margins of the term.
inline void apply_gen_term(Element& out, const Gen& g, const DecoratedMatrix& A, const Laurent& c,
                           LabelMode mode) {
    const auto margins = ro(A);
    const int n = int(margins.size());
    auto diag_ok = [&](int lowered_at, int amount) {
        return mode == LabelMode::stable ||
               (lowered_at >= 1 && margins[size_t(lowered_at - 1)] >= amount);
    };
    switch (g.kind) {
    case Gen::Kind::E:
    case Gen::Kind::Raise: {
        const int h = g.index, R = g.power;
        if (h < 1 || h >= n) throw std::out_of_range("generator index out of range");
        if (!diag_ok(h + 1, R)) return;
        mul_term_br_raise(out, h, R, A, c, mode);
        return;
    }
    case Gen::Kind::F:
    case Gen::Kind::Lower: {
        const int h = g.index, R = g.power;
        if (h < 1 || h >= n) throw std::out_of_range("generator index out of range");
        if (!diag_ok(h, R)) return;
        mul_term_br_lower(out, h, R, A, c, mode);
        return;
    }
    case Gen::Kind::Hplus:
    case Gen::Kind::Hminus: {
        const int a = g.index;
        if (a < 1 || a > n) throw std::out_of_range("generator index out of range");
        const int da = margins[size_t(a - 1)];
        out.add(A, c * Laurent::v(g.kind == Gen::Kind::Hplus ? -da : da));
        return;
    }
    case Gen::Kind::DiagMark: {
        const int h = g.index;
        if (h < 1 || h > n) throw std::out_of_range("generator index out of range");
        if (mode == LabelMode::standard && margins[0 + size_t(h - 1)] <= 0) return;
        mul_term_br_mark(out, h, A, c, mode);
        return;
    }
    case Gen::Kind::L: {
        const int d1 = margins[0];
        out.add(A, c * Laurent::v(-2 * d1));
        if (mode == LabelMode::stable || d1 > 0)
            mul_term_br_mark(out, 1, A, c * Laurent::v(-d1), mode);
        return;
    }
    }
}

} // namespace detail

/// Apply a generator to an element (basis preserved; computed in the
/// normalized basis internally).
inline Element apply_gen(const Gen& g, const Element& x) {
    const Element xb = to_bracket(x);
    Element out(x.rows, x.cols, x.degree, Basis::bracket, x.mode);
    for (auto& [A, c] : xb.terms) detail::apply_gen_term(out, g, A, c, x.mode);
    return x.basis == Basis::e ? from_bracket(out) : out;
}

/// Right-to-left fold of a generator word over an element.
inline Element apply_word(const std::vector<Gen>& word, Element x) {
    for (auto it = word.rbegin(); it != word.rend(); ++it) x = apply_gen(*it, x);
    return x;
}

/// The generator as an element of the degree-d algebra (normalized basis).
inline Element generator_element(const Gen& g, int n, int d) {
    Element out(n, n, d, Basis::bracket);
    auto diags = [&](int total) { return enumerate_labels(n, total, /*diagonal_only=*/true); };
    switch (g.kind) {
    case Gen::Kind::E:
    case Gen::Kind::Raise:
        if (g.index < 1 || g.index >= n) throw std::out_of_range("generator index out of range");
        for (auto& D : diags(d - g.power)) {
            DecoratedMatrix B = D;
            B.at(g.index, g.index + 1) += g.power;
            out.add(B, Laurent(1));
        }
        return out;
    case Gen::Kind::F:
    case Gen::Kind::Lower:
        if (g.index < 1 || g.index >= n) throw std::out_of_range("generator index out of range");
        for (auto& D : diags(d - g.power)) {
            DecoratedMatrix C = D;
            C.at(g.index + 1, g.index) += g.power;
            out.add(C, Laurent(1));
        }
        return out;
    case Gen::Kind::Hplus:
    case Gen::Kind::Hminus:
        if (g.index < 1 || g.index > n) throw std::out_of_range("generator index out of range");
        for (auto& D : diags(d)) {
            const int da = D.at(g.index, g.index);
            out.add(D, Laurent::v(g.kind == Gen::Kind::Hplus ? -da : da));
        }
        return out;
    case Gen::Kind::DiagMark:
        for (auto& D : diags(d))
            if (D.at(g.index, g.index) > 0)
                out.add(D.with_delta({{g.index, g.index}}), Laurent(1));
        return out;
    case Gen::Kind::L:
        for (auto& D : diags(d)) {
            const int d1 = D.at(1, 1);
            out.add(D, Laurent::v(-2 * d1));
            if (d1 > 0) out.add(D.with_delta({{1, 1}}), Laurent::v(-d1));
        }
        return out;
    }
    throw std::logic_error("unreachable");
}

/// Divide every coefficient exactly by (v - v^-1).
inline Element div_v_minus_vinv(const Element& x) {
    Element r(x.rows, x.cols, x.degree, x.basis, x.mode);
    const Laurent den = Laurent::v(1) - Laurent::v(-1);
    for (auto& [k, c] : x.terms) r.add(k, exact_div(c, den));
    return r;
}

// ---------------------------------------------------------------------------
// Relation battery and the marked-diagonal exchange identity.
// ---------------------------------------------------------------------------

struct RelationReport {
    struct Line {
        std::string name;
        bool pass;
        std::string detail;
    };
    std::vector<Line> lines;
    bool all_pass() const {
        for (auto& l : lines)
            if (!l.pass) return false;
        return true;
    }
};

/// The defining relation battery of the degree-d algebra.
inline RelationReport relation_suite(int n, int d) {
    if (n < 2) throw std::invalid_argument("relation_suite: need n >= 2");
    RelationReport rep;
    auto record = [&](const std::string& name, const Element& lhs, const Element& rhs) {
        const bool ok = lhs == rhs;
        rep.lines.push_back({name, ok, ok ? "" : lhs.diff(rhs)});
    };
    const Laurent v = Laurent::v(1), vi = Laurent::v(-1);
    auto elt = [&](const Gen& g) { return generator_element(g, n, d); };
    auto word = [&](std::vector<Gen> w, const Gen& last) { return apply_word(w, elt(last)); };
    const Element one = unit_element(n, d, Basis::bracket);

    for (int a = 1; a <= n; ++a) {
        record("(a) H" + std::to_string(a) + " H-" + std::to_string(a) + " = 1",
               word({Gen::Hplus(a)}, Gen::Hminus(a)), one);
        for (int b = 1; b <= n; ++b)
            record("(a) H" + std::to_string(a) + " H" + std::to_string(b) + " commute",
                   word({Gen::Hplus(a)}, Gen::Hplus(b)), word({Gen::Hplus(b)}, Gen::Hplus(a)));
    }
    for (int i = 1; i < n; ++i) {
        Element E = elt(Gen::E(i)), F = elt(Gen::F(i));
        for (int t = 0; t < d; ++t) E = apply_gen(Gen::E(i), E);
        for (int t = 0; t < d; ++t) F = apply_gen(Gen::F(i), F);
        record("(b) E" + std::to_string(i) + "^{d+1} = 0", E, Element(n, n, d, Basis::bracket));
        record("(b) F" + std::to_string(i) + "^{d+1} = 0", F, Element(n, n, d, Basis::bracket));
    }
    for (int i = 1; i + 1 < n; ++i) {
        const int j = i + 1;
        record("(c) EE-exchange (" + std::to_string(i) + "," + std::to_string(j) + ")",
               word({Gen::E(i), Gen::E(i)}, Gen::E(j)) + word({Gen::E(j), Gen::E(i)}, Gen::E(i)),
               (v + vi) * word({Gen::E(i), Gen::E(j)}, Gen::E(i)));
        record("(d) EE-exchange (" + std::to_string(j) + "," + std::to_string(i) + ")",
               word({Gen::E(j), Gen::E(j)}, Gen::E(i)) + word({Gen::E(i), Gen::E(j)}, Gen::E(j)),
               (v + vi) * word({Gen::E(j), Gen::E(i)}, Gen::E(j)));
        record("(e) FF-exchange (" + std::to_string(i) + "," + std::to_string(j) + ")",
               word({Gen::F(i), Gen::F(i)}, Gen::F(j)) + word({Gen::F(j), Gen::F(i)}, Gen::F(i)),
               (v + vi) * word({Gen::F(i), Gen::F(j)}, Gen::F(i)));
        record("(f) FF-exchange (" + std::to_string(j) + "," + std::to_string(i) + ")",
               word({Gen::F(j), Gen::F(j)}, Gen::F(i)) + word({Gen::F(i), Gen::F(j)}, Gen::F(j)),
               (v + vi) * word({Gen::F(j), Gen::F(i)}, Gen::F(j)));
    }
    for (int a = 1; a <= n; ++a)
        for (int i = 1; i < n; ++i) {
            const int s = (a == i ? 1 : 0) - (a == i + 1 ? 1 : 0);
            record("(g) H" + std::to_string(a) + " E" + std::to_string(i),
                   word({Gen::Hplus(a)}, Gen::E(i)), Laurent::v(s) * word({Gen::E(i)}, Gen::Hplus(a)));
            record("(h) H" + std::to_string(a) + " F" + std::to_string(i),
                   word({Gen::Hplus(a)}, Gen::F(i)),
                   Laurent::v(-s) * word({Gen::F(i)}, Gen::Hplus(a)));
        }
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) {
            Element lhs = word({Gen::E(i)}, Gen::F(j)) - word({Gen::F(j)}, Gen::E(i));
            Element rhs(n, n, d, Basis::bracket);
            if (i == j)
                rhs = div_v_minus_vinv(word({Gen::Hplus(i)}, Gen::Hminus(i + 1)) -
                                       word({Gen::Hminus(i)}, Gen::Hplus(i + 1)));
            record("(i) [E" + std::to_string(i) + ",F" + std::to_string(j) + "]", lhs, rhs);
        }
    for (int a = 1; a <= n; ++a)
        record("(j) H" + std::to_string(a) + " L commute", word({Gen::Hplus(a)}, Gen::L()),
               word({Gen::L()}, Gen::Hplus(a)));
    record("(k) L^2 = L", word({Gen::L()}, Gen::L()), elt(Gen::L()));
    for (int i = 1; i < n; ++i) {
        record("(l) L E" + std::to_string(i) + " = L E" + std::to_string(i) + " L",
               word({Gen::L()}, Gen::E(i)), word({Gen::L(), Gen::E(i)}, Gen::L()));
        record("(m) L F" + std::to_string(i) + " = L F" + std::to_string(i) + " L",
               word({Gen::L()}, Gen::F(i)), word({Gen::L(), Gen::F(i)}, Gen::L()));
        record("(n) ELE balance i=" + std::to_string(i),
               (v + vi) * word({Gen::E(i), Gen::L()}, Gen::E(i)),
               vi * word({Gen::E(i), Gen::E(i)}, Gen::L()) +
                   v * word({Gen::L(), Gen::E(i)}, Gen::E(i)));
        record("(o) FLF balance i=" + std::to_string(i),
               (v + vi) * word({Gen::F(i), Gen::L()}, Gen::F(i)),
               v * word({Gen::F(i), Gen::F(i)}, Gen::L()) +
                   vi * word({Gen::L(), Gen::F(i)}, Gen::F(i)));
    }
    return rep;
}

/// Exchange identity moving a marked diagonal cell from row t to row t+1,
/// checked for every admissible diagonal of trace d.
inline RelationReport lemma_marked_diagonal_exchange(int n, int d, int t) {
    if (t < 1 || t >= n) throw std::invalid_argument("t out of range");
    RelationReport rep;
    for (auto& D : enumerate_labels(n, d, /*diagonal_only=*/true)) {
        const int dt = D.at(t, t), dt1 = D.at(t + 1, t + 1);
        if (dt < 1 || dt1 < 1) {
            rep.lines.push_back({"D=" + D.str() + " skipped (degenerate)", true, "skipped"});
            continue;
        }
        auto mk = [&](DecoratedMatrix m, std::vector<std::pair<int, int>> del) {
            return single_term(m.with_delta(std::move(del)), Basis::bracket);
        };
        auto mul = [&](const DecoratedMatrix& l, const Element& x) {
            return validate(l, LabelMode::standard) ? mul_bracket(l, x)
                                                    : Element(n, n, d, Basis::bracket);
        };
        DecoratedMatrix Dp = D; // D with the (t+1) diagonal entry lowered
        Dp.at(t + 1, t + 1) -= 1;
        DecoratedMatrix a1 = Dp.plus_unit(t + 1, t, 1);
        DecoratedMatrix a2 = Dp.plus_unit(t, t, 1);
        DecoratedMatrix a3 = Dp.plus_unit(t, t + 1, 1);
        DecoratedMatrix b1 = D.plus_unit(t, t, -1).plus_unit(t, t + 1, 1);
        DecoratedMatrix b2 = D.plus_unit(t, t, -1).plus_unit(t + 1, t, 1);
        DecoratedMatrix b4 = D.plus_unit(t + 1, t + 1, 1).plus_unit(t, t, -1);

        Element rhs = mul(a1, mul(a2.with_delta({{t, t}}), mk(a3, {})));
        rhs -= mul(b1, mul(b2, mk(D, {{t, t}})));
        rhs -= mul(D.with_delta({{t, t}}), mul(a1, mk(a3, {})));
        rhs += mul(b1, mul(b4.with_delta({{t, t}}), mk(b2, {})));
        rhs = Laurent::v(dt) * rhs;
        Element corr = Laurent(2) * mk(D, {{t, t}}) + mk(D, {});
        rhs -= (Laurent::v(2 * dt - dt1 - 1) * qbinom(dt, 1).bar()) * corr;
        rhs -= (Laurent::v(dt1 - 2) * qbinom(dt1, 1).bar()) * mk(D, {});

        const Element lhs = mk(D, {{t + 1, t + 1}});
        const bool ok = lhs == rhs;
        rep.lines.push_back({"D=" + D.str() + " t=" + std::to_string(t), ok,
                             ok ? "" : lhs.diff(rhs)});
    }
    return rep;
}

} // namespace mirabolic
