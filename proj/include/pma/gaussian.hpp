// Closed-form univariate Gaussian dynamics of the flow: the Riccati slope
// ODE and its tanh solution, the Fokker–Planck comparison, the discrete
// slope update with its contraction certificate, the Gaussian three-point
// identity, and the entropic-transport scaling-limit residual.
#pragma once

#include <string>
#include <vector>

#include "pma/potential.hpp"
#include "pma/quadrature.hpp"
#include "pma/target.hpp"

namespace pma {

// σ_t = tanh(t/λ + atanh λ) for reference N(0, λ²), target N(0,1), 0 < λ < 1.
double riccati_sigma(double t, double lambda);

// Same σ_t via RK4 on the slope ODE ċ = -c² + 1/λ²; the independent route.
double riccati_sigma_ode(double t, double lambda, double dt = 1e-4);

// σ²_{F,t} = 1 - (1-λ²) e^{-2t} for the Ornstein–Uhlenbeck relaxation.
double fokker_planck_sigma_sq(double t, double lambda);

// (1 - σ²_{F,t}) / (1 - σ_t²); diverges as t → ∞ for λ < 1.
double variance_ratio(double t, double lambda);

// One discrete slope update c ↦ c - η (c² - 1/λ²).
double discrete_gaussian_step(double c, double eta, double lambda);

struct GaussianFlowParams {
    double lambda = 0.0;
    double eta = 0.0;
    double c0 = 0.0;
    double upsilon = 0.0;
    double delta = 0.0;  // basin radius around 1/λ
};

struct CertificateResult {
    bool issued = false;
    GaussianFlowParams params;
    std::string rejection;  // violated hypothesis when not issued
};

// Checks the hypotheses for geometric contraction |c_k - 1/λ| ≤ υ^k |c0 - 1/λ|:
// η ∈ (0, λ), υ ∈ (|1 - 2η/λ|, 1), and c0 within the computed basin radius.
CertificateResult contraction_certificate(double lambda, double eta, double c0, double upsilon);

struct GaussianTriple {
    double sigma_g, sigma_1, sigma_2, sigma_pi;
};

struct ThreePointTerms {
    double lhs, bg_pi_rho1, bg_pi_rho2, bg_gpi;
    double residual() const { return lhs - (bg_pi_rho1 - bg_pi_rho2 + bg_gpi); }
};

// Closed-form pieces of the Bregman three-point identity for centered
// Gaussians: lhs = bg_pi_rho1 - bg_pi_rho2 + bg_gpi.
ThreePointTerms gaussian_three_point(const GaussianTriple& t);

// Slope a of the entropic self-transport potential a·y²/2 between standard
// normals: the scaling operator maps it to itself exactly at temperature ε.
double entropic_quadratic_slope(double epsilon);

struct SinkhornSpec {
    QuadratureSpec outer{24, -9.0, 9.0, 36};   // x integral
    QuadratureSpec inner{24, -10.0, 10.0, 40}; // y' integral
    std::vector<double> probes{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
    double convergence_tol = 1e-7;  // refinement disagreement triggers NumericError
};

// One application of the entropic rescaling operator to ψ at probe y,
// log-sum-exp stabilized:  Ṽ^ε(y) = ε log ∫ e^{xy/ε - f(x)} / D(x) dx with
// D(x) = ∫ e^{(xy' - ψ(y'))/ε - g(y')} dy'.
double sinkhorn_apply(const std::function<double(double)>& psi_value, double epsilon,
                      const Target1D& f, const Target1D& g, const SinkhornSpec& spec, double y);

// max over probes of |(Ṽ^ε(y) - ψ(y))/ε - (-f(ψ'(y)) + g(y) + log ψ''(y))|.
double sinkhorn_residual(const PotentialStack& psi, double epsilon, const Target1D& f,
                         const Target1D& g, const SinkhornSpec& spec);

// max over probes of |Ṽ^ε(y) - ψ^ε(y)|/ε at the entropic fixed point ψ^ε for
// the standard-normal pair; zero up to quadrature error at every ε.
double sinkhorn_fixed_point_residual(double epsilon, const SinkhornSpec& spec);

}  // namespace pma
