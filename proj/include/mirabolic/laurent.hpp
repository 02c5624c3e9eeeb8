#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace mirabolic {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Exact element of Z[v, v^-1], stored sparsely as exponent -> coefficient.
/// Zero coefficients are never stored; equality is coefficient-wise.
class Laurent {
public:
    Laurent() = default;
    Laurent(long long c) { if (c != 0) c_[0] = c; }
    Laurent(const Int& c) { if (c != 0) c_[0] = c; }

    static Laurent term(Int c, int exp) {
        Laurent p;
        if (c != 0) p.c_[exp] = std::move(c);
        return p;
    }
    static Laurent v(int exp = 1) { return term(1, exp); }

    bool is_zero() const { return c_.empty(); }
    const std::map<int, Int>& coeffs() const { return c_; }

    Int coeff(int exp) const {
        auto it = c_.find(exp);
        return it == c_.end() ? Int(0) : it->second;
    }
    int min_exp() const { return c_.empty() ? 0 : c_.begin()->first; }
    int max_exp() const { return c_.empty() ? 0 : c_.rbegin()->first; }

    /// True when every exponent is even (i.e. the value is a polynomial in v^2).
    bool even_support() const {
        for (auto& [e, c] : c_)
            if (e % 2 != 0) return false;
        return true;
    }

    Laurent& operator+=(const Laurent& o) {
        for (auto& [e, c] : o.c_) add_term(e, c);
        return *this;
    }
    Laurent& operator-=(const Laurent& o) {
        for (auto& [e, c] : o.c_) add_term(e, -c);
        return *this;
    }
    friend Laurent operator+(Laurent a, const Laurent& b) { return a += b; }
    friend Laurent operator-(Laurent a, const Laurent& b) { return a -= b; }
    Laurent operator-() const {
        Laurent r;
        for (auto& [e, c] : c_) r.c_[e] = -c;
        return r;
    }

    friend Laurent operator*(const Laurent& a, const Laurent& b) {
        Laurent r;
        for (auto& [ea, ca] : a.c_)
            for (auto& [eb, cb] : b.c_) r.add_term(ea + eb, ca * cb);
        return r;
    }
    Laurent& operator*=(const Laurent& o) { return *this = *this * o; }

    /// Multiply by v^k.
    Laurent shifted(int k) const {
        Laurent r;
        for (auto& [e, c] : c_) r.c_[e + k] = c;
        return r;
    }

    bool operator==(const Laurent& o) const { return c_ == o.c_; }
    bool operator!=(const Laurent& o) const { return c_ != o.c_; }
    bool operator<(const Laurent& o) const { return c_ < o.c_; }

    /// Bar involution v -> v^-1.
    Laurent bar() const {
        Laurent r;
        for (auto& [e, c] : c_) r.c_[-e] = c;
        return r;
    }

    /// Exact evaluation at v = v0 (v0 != 0).
    Rational eval(const Rational& v0) const {
        if (v0 == 0) throw std::domain_error("invalid specialization");
        Rational r = 0;
        for (auto& [e, c] : c_) r += Rational(c) * pow_rational(v0, e);
        return r;
    }

    /// Exact evaluation under v^2 = q; requires even support.
    Rational eval_q(const Rational& q) const {
        if (q == 0) throw std::domain_error("invalid specialization");
        if (!even_support()) throw std::domain_error("odd exponent under v^2 specialization");
        Rational r = 0;
        for (auto& [e, c] : c_) r += Rational(c) * pow_rational(q, e / 2);
        return r;
    }

    std::string str() const {
        if (c_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (auto& [e, c] : c_) {
            Int a = c;
            if (first) {
                if (a < 0) { os << "-"; a = -a; }
            } else {
                os << (a < 0 ? " - " : " + ");
                if (a < 0) a = -a;
            }
            first = false;
            if (e == 0) {
                os << a;
            } else {
                if (a != 1) os << a << "*";
                os << "v";
                if (e != 1) os << "^" << e;
            }
        }
        return os.str();
    }

    static Rational pow_rational(const Rational& x, long long e) {
        if (e == 0) return 1;
        Rational b = e > 0 ? x : Rational(1) / x;
        long long n = e > 0 ? e : -e;
        Rational r = 1;
        while (n > 0) {
            if (n & 1) r *= b;
            b *= b;
            n >>= 1;
        }
        return r;
    }

private:
    void add_term(int e, const Int& c) {
        if (c == 0) return;
        auto it = c_.find(e);
        if (it == c_.end()) {
            c_[e] = c;
        } else {
            it->second += c;
            if (it->second == 0) c_.erase(it);
        }
    }

    std::map<int, Int> c_;
};

/// Exact division; throws when the remainder is nonzero.
inline Laurent exact_div(const Laurent& a, const Laurent& b) {
    if (b.is_zero()) throw std::domain_error("inexact division");
    if (a.is_zero()) return Laurent();
    // Normalize both to ordinary polynomials (lowest exponent 0), divide, reshift.
    const int sa = a.min_exp(), sb = b.min_exp();
    Laurent rem = a.shifted(-sa);
    const Laurent den = b.shifted(-sb);
    const int db = den.max_exp();
    const Int lead = den.coeff(db);
    Laurent quo;
    while (!rem.is_zero() && rem.max_exp() >= db) {
        const Int c = rem.coeff(rem.max_exp());
        if (c % lead != 0) throw std::domain_error("inexact division");
        Laurent t = Laurent::term(c / lead, rem.max_exp() - db);
        quo += t;
        rem -= t * den;
    }
    if (!rem.is_zero()) throw std::domain_error("inexact division");
    return quo.shifted(sa - sb);
}

/// Gaussian binomial [N, t] = prod_{i=1..t} (v^{2(N-i+1)} - 1) / (v^{2i} - 1).
/// The product is evaluated literally with exact cancellation, so N may be
/// negative (the result is then still a Laurent polynomial).
inline Laurent qbinom(long long N, long long t) {
    if (t < 0) throw std::domain_error("qbinom: negative t");
    Laurent num(1), den(1);
    for (long long i = 1; i <= t; ++i) {
        Laurent f = Laurent::v(int(2 * (N - i + 1))) - Laurent(1);
        if (f.is_zero()) return Laurent();
        num *= f;
        den *= Laurent::v(int(2 * i)) - Laurent(1);
    }
    return exact_div(num, den);
}

/// Element of Z[v, v^-1][v', v'^-1], used when fitting stabilized products.
class TwoVarLaurent {
public:
    TwoVarLaurent() = default;
    TwoVarLaurent(const Laurent& p) {
        for (auto& [e, c] : p.coeffs()) c_[{e, 0}] = c;
    }

    static TwoVarLaurent term(Int c, int ev, int evp) {
        TwoVarLaurent r;
        if (c != 0) r.c_[{ev, evp}] = std::move(c);
        return r;
    }

    bool is_zero() const { return c_.empty(); }
    const std::map<std::pair<int, int>, Int>& coeffs() const { return c_; }

    TwoVarLaurent& operator+=(const TwoVarLaurent& o) {
        for (auto& [e, c] : o.c_) add_term(e, c);
        return *this;
    }
    friend TwoVarLaurent operator+(TwoVarLaurent a, const TwoVarLaurent& b) { return a += b; }
    friend TwoVarLaurent operator-(TwoVarLaurent a, const TwoVarLaurent& b) {
        for (auto& [e, c] : b.c_) a.add_term(e, -c);
        return a;
    }
    friend TwoVarLaurent operator*(const TwoVarLaurent& a, const TwoVarLaurent& b) {
        TwoVarLaurent r;
        for (auto& [ea, ca] : a.c_)
            for (auto& [eb, cb] : b.c_)
                r.add_term({ea.first + eb.first, ea.second + eb.second}, ca * cb);
        return r;
    }

    bool operator==(const TwoVarLaurent& o) const { return c_ == o.c_; }

    /// Substitute v' = v^{-p}.
    Laurent eval_vp_power(int p) const {
        Laurent r;
        for (auto& [e, c] : c_) r += Laurent::term(c, e.first - p * e.second);
        return r;
    }
    /// Substitute v' = 1.
    Laurent eval_vp_one() const { return eval_vp_power(0); }

    std::string str() const {
        if (c_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (auto& [e, c] : c_) {
            if (!first) os << " + ";
            first = false;
            os << "(" << c << ")";
            if (e.first != 0) os << "*v^" << e.first;
            if (e.second != 0) os << "*w^" << e.second;
        }
        return os.str();
    }

private:
    void add_term(std::pair<int, int> e, const Int& c) {
        if (c == 0) return;
        auto it = c_.find(e);
        if (it == c_.end()) {
            c_[e] = c;
        } else {
            it->second += c;
            if (it->second == 0) c_.erase(it);
        }
    }

    std::map<std::pair<int, int>, Int> c_;
};

} // namespace mirabolic
