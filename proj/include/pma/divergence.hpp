// Numerical divergences between 1D densities: KL by quadrature, Brenier maps
// by monotone rearrangement, the Wasserstein-mirror Bregman divergence B_G
// through its transport representation, W2, and the MMD two-sample statistic.
#pragma once

#include <functional>
#include <vector>

#include "pma/density.hpp"
#include "pma/quadrature.hpp"
#include "pma/rng.hpp"

namespace pma {

// ∫ ρ log(ρ/π); throws NumericError when π underflows where ρ carries mass.
double kl_quadrature(const Density1D& rho, const Density1D& pi, const QuadratureSpec& quad);

// Monotone rearrangement T = quantile_to ∘ cdf_from pushing `from` to `to`.
struct BrenierMap1D {
    std::function<double(double)> map;
    std::function<double(double)> slope;  // T'(y) = from.pdf(y) / to.pdf(T(y))
    double operator()(double y) const { return map(y); }
};
BrenierMap1D brenier_map_1d(const Density1D& from, const Density1D& to);

// B_G(ρ2|ρ1) for the mirror G = ½ W₂²(·, ref), evaluated through the
// transport form  E_{Y~ref}[ φ_{ρ1}(T2(Y)) + ψ_{ρ1}(Y) − Y·T2(Y) ]  with
// ψ_{ρ1} the antiderivative of the map ref→ρ1 and φ_{ρ1} its conjugate.
double bregman_bg(const Density1D& rho2, const Density1D& rho1, const Density1D& ref,
                  const QuadratureSpec& quad);

// 2-Wasserstein distance via the quantile representation.
double w2_1d(const Density1D& rho, const Density1D& pi, const QuadratureSpec& quad);

// KL(π|ρ) − (λ/β)·B_G(π|ρ); expected nonnegative when g_ref is λ-strongly
// log-concave and the map g_ref→ρ has slope at most β.
double relative_convexity_gap(const Density1D& pi, const Density1D& rho, const Density1D& g_ref,
                              double lambda_g, double beta, const QuadratureSpec& quad);

// Unbiased U-statistic estimate of MMD² with Gaussian kernel
// k(a,b) = exp(-(a-b)²/(2 bw²)).
double mmd_sq(const std::vector<double>& xs, const std::vector<double>& ys, double bandwidth);

// Biased V-statistic variant (zero for identical samples).
double mmd_sq_biased(const std::vector<double>& xs, const std::vector<double>& ys,
                     double bandwidth);

// Median pairwise distance of the pooled sample.
double median_heuristic_bandwidth(const std::vector<double>& xs, const std::vector<double>& ys);

struct PermutationTestResult {
    double observed = 0.0;
    double quantile_95 = 0.0;
    double quantile_99 = 0.0;
    double p_value = 1.0;
};

// Label-permutation null for the MMD² statistic (seeded, kernel matrix cached).
PermutationTestResult mmd_permutation_test(const std::vector<double>& xs,
                                           const std::vector<double>& ys, double bandwidth,
                                           int permutations, uint64_t seed);

}  // namespace pma
