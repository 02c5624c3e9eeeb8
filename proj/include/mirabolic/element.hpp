#pragma once

#include "mirabolic/decorated.hpp"
#include "mirabolic/laurent.hpp"

#include <map>
#include <stdexcept>
#include <string>

namespace mirabolic {

enum class Basis { e, bracket };

/// Finitely supported map from labels to coefficients. `degree` is the common
/// entry sum of all keys (the d in MS(n,d)); stable-mode elements carry
/// degree -1 since the entry sum is not conserved there.
struct Element {
    int rows = 0, cols = 0;
    int degree = 0;
    Basis basis = Basis::e;
    LabelMode mode = LabelMode::standard;
    std::map<DecoratedMatrix, Laurent> terms;

    Element() = default;
    Element(int r, int c, int d, Basis b, LabelMode m = LabelMode::standard)
        : rows(r), cols(c), degree(d), basis(b), mode(m) {}

    bool is_zero() const { return terms.empty(); }

    void add(const DecoratedMatrix& key, const Laurent& c) {
        if (c.is_zero()) return;
        auto it = terms.find(key);
        if (it == terms.end()) {
            terms.emplace(key, c);
        } else {
            it->second += c;
            if (it->second.is_zero()) terms.erase(it);
        }
    }

    Element& operator+=(const Element& o) {
        for (auto& [k, c] : o.terms) add(k, c);
        return *this;
    }
    Element& operator-=(const Element& o) {
        for (auto& [k, c] : o.terms) add(k, -c);
        return *this;
    }
    friend Element operator+(Element a, const Element& b) { return a += b; }
    friend Element operator-(Element a, const Element& b) { return a -= b; }
    friend Element operator*(const Laurent& s, Element a) {
        Element r(a.rows, a.cols, a.degree, a.basis, a.mode);
        for (auto& [k, c] : a.terms) r.add(k, c * s);
        return r;
    }

    bool operator==(const Element& o) const { return terms == o.terms && basis == o.basis; }

    /// First differing term against another element, for failure reports.
    std::string diff(const Element& o) const {
        for (auto& [k, c] : terms) {
            auto it = o.terms.find(k);
            if (it == o.terms.end()) return k.str() + ": " + c.str() + " vs 0";
            if (!(it->second == c)) return k.str() + ": " + c.str() + " vs " + it->second.str();
        }
        for (auto& [k, c] : o.terms)
            if (!terms.count(k)) return k.str() + ": 0 vs " + c.str();
        return "";
    }

    std::string str() const {
        if (terms.empty()) return "0";
        std::string s;
        for (auto& [k, c] : terms) {
            if (!s.empty()) s += " + ";
            s += "(" + c.str() + ")*" + (basis == Basis::e ? "e" : "b") + k.str();
        }
        return s;
    }
};

/// Single-term element; an invalid label yields the zero element (empty
/// orbits have zero characteristic function).
inline Element single_term(const DecoratedMatrix& m, Basis b, LabelMode mode = LabelMode::standard,
                           Laurent c = Laurent(1)) {
    Element x(m.rows, m.cols, mode == LabelMode::standard ? m.total() : -1, b, mode);
    if (validate(m, mode)) x.add(m, c);
    return x;
}

/// Basis conversions: [A]_D = v^{-(d-r)} e_{A,D}.
inline Element to_bracket(const Element& x) {
    if (x.basis == Basis::bracket) return x;
    Element r(x.rows, x.cols, x.degree, Basis::bracket, x.mode);
    for (auto& [k, c] : x.terms) r.add(k, c.shifted(int(dim_excess(k))));
    return r;
}
inline Element from_bracket(const Element& x) {
    if (x.basis == Basis::e) return x;
    Element r(x.rows, x.cols, x.degree, Basis::e, x.mode);
    for (auto& [k, c] : x.terms) r.add(k, c.shifted(-int(dim_excess(k))));
    return r;
}

/// Two-sided identity: sum of the plain diagonal labels of trace d.
inline Element unit_element(int n, int d, Basis b = Basis::e) {
    Element u(n, n, d, b);
    for (auto& m : enumerate_labels(n, d, /*diagonal_only=*/true)) u.add(m, Laurent(1));
    return u;
}

} // namespace mirabolic
