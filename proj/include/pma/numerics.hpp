// Small numerical kernels shared across modules: normal cdf, bisection on
// monotone functions, a uniform-grid not-a-knot cubic spline, and a
// cumulative Simpson antiderivative.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pma/jet.hpp"

namespace pma {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double normal_log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); }

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Solve f(x) = target for increasing f. Brackets from [lo, hi] with doubling
// expansion, bisects to xtol, then polishes with two Newton steps when a
// derivative is supplied.
double invert_increasing(const std::function<double(double)>& f, double target, double lo,
                         double hi, double xtol = 1e-12,
                         const std::function<double(double)>& deriv = nullptr);

// Uniform-grid cubic spline with not-a-knot ends and quadratic continuation
// outside the grid. Piecewise polynomials make all derivatives up to order 3
// exact derivatives of the evaluated function.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(double lo, double hi, std::vector<double> values);

    double lo() const { return lo_; }
    double hi() const { return hi_; }

    Jet3 eval(double x) const;
    double value(double x) const { return eval(x).v; }

private:
    double lo_ = 0.0, hi_ = 1.0, h_ = 1.0, inv_h_ = 1.0;
    // coefficient blocks per piece: value a + b t + c t^2 + d t^3, t = x - x_i
    std::vector<double> a_, b_, c_, d_;
};

// Least-squares cubic B-spline on uniform knots. Fitting (rather than
// interpolating) damps sub-knot noise, which keeps repeated freeze/refit
// cycles of a flow stable; cubic polynomials are reproduced exactly.
class LsqSpline {
public:
    LsqSpline() = default;
    // Fit to samples of fn on a uniform data grid of data_n points covering
    // [lo, hi], with `intervals` knot spans (data_n should be a few times
    // intervals + 3).
    LsqSpline(const std::function<double(double)>& fn, double lo, double hi, int data_n,
              int intervals);

    Jet3 eval(double x) const;
    double value(double x) const { return eval(x).v; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double lo_ = 0.0, hi_ = 1.0, h_ = 1.0, inv_h_ = 1.0;
    int intervals_ = 0;
    std::vector<double> coef_;  // intervals_ + 3 B-spline coefficients
};

// Cumulative antiderivative F(y) = ∫_anchor^y f on a uniform grid via
// composite Simpson, refined inside panels with Hermite interpolation.
class CumulativeIntegral {
public:
    CumulativeIntegral(std::function<double(double)> f, double lo, double hi, int panels,
                       double anchor);

    double operator()(double y) const;

private:
    std::function<double(double)> f_;
    double lo_, h_;
    double anchor_value_ = 0.0;
    std::vector<double> cum_;  // cumulative integral from lo to node i
};

}  // namespace pma
