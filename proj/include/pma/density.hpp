// Analytic 1D probability densities with normalized log-density, cdf and
// quantile. Quantiles are bisection-based with bracket doubling from the
// support hint.
#pragma once

#include <functional>
#include <string>

#include "pma/numerics.hpp"
#include "pma/quadrature.hpp"

namespace pma {

struct Density1D {
    std::function<double(double)> log_density;  // normalized
    std::function<double(double)> cdf;
    std::function<double(double)> quantile;
    // Survival function and its inverse keep full relative precision in the
    // upper tail, where cdf saturates to 1 in double arithmetic.
    std::function<double(double)> sf;
    std::function<double(double)> isf;
    double support_lo = -8.0;
    double support_hi = 8.0;

    double pdf(double x) const { return std::exp(log_density(x)); }
};

Density1D gaussian_density(double mean, double sd);

// Two-component unit-variance normal location mixture w·N(a,1) + (1-w)·N(b,1).
Density1D normal_mixture_density(double a, double b, double w);

// Logistic(0, 1).
Density1D logistic_density();

// Generic quantile through bisection on the cdf (tolerance 1e-12, bracket
// doubling from the support hint), Newton-polished with the pdf.
std::function<double(double)> quantile_by_bisection(std::function<double(double)> cdf,
                                                    std::function<double(double)> pdf, double lo,
                                                    double hi);

// ∫ pdf over [spec.lo, spec.hi]; used by normalization checks.
double density_mass(const Density1D& d, const QuadratureSpec& spec);

}  // namespace pma
