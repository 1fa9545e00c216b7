// Fixed Gauss–Legendre composite rules for density integrals and
// Gauss–Hermite rules for Gaussian expectations.
#pragma once

#include <functional>
#include <vector>

namespace pma {

struct QuadratureSpec {
    int nodes = 64;       // nodes per panel
    double lo = -8.0;
    double hi = 8.0;
    int panels = 4;
};

struct QuadratureRule {
    std::vector<double> x;
    std::vector<double> w;
};

// Gauss–Legendre nodes/weights on [-1, 1].
QuadratureRule gauss_legendre(int n);

// Composite Gauss–Legendre rule materialized on [spec.lo, spec.hi].
QuadratureRule build_rule(const QuadratureSpec& spec);

double integrate(const QuadratureSpec& spec, const std::function<double(double)>& f);
double integrate(const QuadratureRule& rule, const std::function<double(double)>& f);

// Nodes/weights for E[h(Z)], Z ~ N(0,1): E[h] ≈ Σ w_i h(x_i).
QuadratureRule gauss_hermite_normal(int n);

}  // namespace pma
