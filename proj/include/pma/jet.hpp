// Truncated third-order Taylor jets: the differentiation currency of the
// potential stack. A Jet3 carries (value, d1, d2, d3) of a scalar function
// at a point; arithmetic and composition propagate derivatives exactly.
#pragma once

#include <cmath>

namespace pma {

struct Jet3 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;

    Jet3() = default;
    Jet3(double v_, double d1_, double d2_, double d3_) : v(v_), d1(d1_), d2(d2_), d3(d3_) {}

    Jet3& operator+=(const Jet3& o) {
        v += o.v; d1 += o.d1; d2 += o.d2; d3 += o.d3;
        return *this;
    }
    Jet3& operator-=(const Jet3& o) {
        v -= o.v; d1 -= o.d1; d2 -= o.d2; d3 -= o.d3;
        return *this;
    }
    Jet3& operator*=(double c) {
        v *= c; d1 *= c; d2 *= c; d3 *= c;
        return *this;
    }
};

// Jet of the identity function at y.
inline Jet3 jet_var(double y) { return {y, 1.0, 0.0, 0.0}; }
inline Jet3 jet_const(double c) { return {c, 0.0, 0.0, 0.0}; }

inline Jet3 operator+(Jet3 a, const Jet3& b) { return a += b; }
inline Jet3 operator-(Jet3 a, const Jet3& b) { return a -= b; }
inline Jet3 operator*(Jet3 a, double c) { return a *= c; }
inline Jet3 operator*(double c, Jet3 a) { return a *= c; }
inline Jet3 operator-(const Jet3& a) { return {-a.v, -a.d1, -a.d2, -a.d3}; }

// Leibniz rule up to order 3.
inline Jet3 operator*(const Jet3& a, const Jet3& b) {
    return {a.v * b.v,
            a.d1 * b.v + a.v * b.d1,
            a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2,
            a.d3 * b.v + 3.0 * a.d2 * b.d1 + 3.0 * a.d1 * b.d2 + a.v * b.d3};
}

// Chain rule: jet of f∘g given the derivatives of f at g.v and the jet of g.
inline Jet3 jet_compose(double f0, double f1, double f2, double f3, const Jet3& g) {
    const double g1 = g.d1, g2 = g.d2, g3 = g.d3;
    return {f0,
            f1 * g1,
            f2 * g1 * g1 + f1 * g2,
            f3 * g1 * g1 * g1 + 3.0 * f2 * g1 * g2 + f1 * g3};
}

inline Jet3 jet_exp(const Jet3& g) {
    const double e = std::exp(g.v);
    return jet_compose(e, e, e, e, g);
}

// Requires g.v > 0.
inline Jet3 jet_log(const Jet3& g) {
    const double iv = 1.0 / g.v;
    return jet_compose(std::log(g.v), iv, -iv * iv, 2.0 * iv * iv * iv, g);
}

// softplus(x) = log(1 + e^x), evaluated overflow-safely.
inline Jet3 jet_softplus(const Jet3& g) {
    const double x = g.v;
    const double e = std::exp(-std::fabs(x));
    const double sp = (x > 0.0 ? x : 0.0) + std::log1p(e);
    const double sig = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    const double s1 = sig * (1.0 - sig);            // sigma'
    const double s2 = s1 * (1.0 - 2.0 * sig);       // sigma''
    return jet_compose(sp, sig, s1, s2, g);
}

inline bool jet_finite(const Jet3& a) {
    return std::isfinite(a.v) && std::isfinite(a.d1) && std::isfinite(a.d2) && std::isfinite(a.d3);
}

}  // namespace pma
