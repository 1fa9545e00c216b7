#include "pma/gaussian.hpp"

#include <cmath>
#include <sstream>

namespace pma {

double riccati_sigma(double t, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("riccati_sigma: lambda must be in (0,1)");
    if (!(t >= 0.0)) throw std::invalid_argument("riccati_sigma: t must be >= 0");
    return std::tanh(t / lambda + std::atanh(lambda));
}

double riccati_sigma_ode(double t, double lambda, double dt) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("riccati_sigma_ode: lambda must be in (0,1)");
    const double il2 = 1.0 / (lambda * lambda);
    auto rhs = [il2](double c) { return -c * c + il2; };
    double c = 1.0;  // slope of ψ0(y) = y²/2
    const long steps = static_cast<long>(std::ceil(t / dt));
    const double h = steps > 0 ? t / static_cast<double>(steps) : 0.0;
    for (long i = 0; i < steps; ++i) {
        const double k1 = rhs(c);
        const double k2 = rhs(c + 0.5 * h * k1);
        const double k3 = rhs(c + 0.5 * h * k2);
        const double k4 = rhs(c + h * k3);
        c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return lambda * c;
}

double fokker_planck_sigma_sq(double t, double lambda) {
    return 1.0 - (1.0 - lambda * lambda) * std::exp(-2.0 * t);
}

double variance_ratio(double t, double lambda) {
    const double s = riccati_sigma(t, lambda);
    return (1.0 - fokker_planck_sigma_sq(t, lambda)) / (1.0 - s * s);
}

double discrete_gaussian_step(double c, double eta, double lambda) {
    return c - eta * (c * c - 1.0 / (lambda * lambda));
}

CertificateResult contraction_certificate(double lambda, double eta, double c0, double upsilon) {
    CertificateResult res;
    std::ostringstream why;
    if (!(lambda > 0.0)) {
        res.rejection = "lambda must be positive";
        return res;
    }
    if (!(eta > 0.0 && eta < lambda)) {
        why << "eta=" << eta << " not in (0, lambda=" << lambda << ")";
        res.rejection = why.str();
        return res;
    }
    const double lo = std::fabs(1.0 - 2.0 * eta / lambda);
    if (!(upsilon > lo && upsilon < 1.0)) {
        why << "upsilon=" << upsilon << " not in (|1-2eta/lambda|=" << lo << ", 1)";
        res.rejection = why.str();
        return res;
    }
    const double delta =
        std::min(2.0 * eta - lambda * (1.0 - upsilon), lambda * (1.0 + upsilon) - 2.0 * eta) /
        (2.0 * eta * lambda);
    if (!(delta > 0.0)) {
        res.rejection = "basin radius not positive";
        return res;
    }
    if (!(std::fabs(c0 - 1.0 / lambda) < delta)) {
        why << "|c0 - 1/lambda| = " << std::fabs(c0 - 1.0 / lambda) << " not below delta=" << delta;
        res.rejection = why.str();
        return res;
    }
    res.issued = true;
    res.params = {lambda, eta, c0, upsilon, delta};
    return res;
}

ThreePointTerms gaussian_three_point(const GaussianTriple& t) {
    if (!(t.sigma_g > 0.0 && t.sigma_1 > 0.0 && t.sigma_2 > 0.0 && t.sigma_pi > 0.0))
        throw std::invalid_argument("gaussian_three_point: std devs must be positive");
    ThreePointTerms out;
    out.lhs = 0.5 * t.sigma_g * (t.sigma_1 - t.sigma_2) *
              (1.0 - t.sigma_pi * t.sigma_pi / (t.sigma_1 * t.sigma_1));
    out.bg_pi_rho1 = 0.5 * (t.sigma_g / t.sigma_1) * (t.sigma_pi - t.sigma_1) * (t.sigma_pi - t.sigma_1);
    out.bg_pi_rho2 = 0.5 * (t.sigma_g / t.sigma_2) * (t.sigma_pi - t.sigma_2) * (t.sigma_pi - t.sigma_2);
    const double inv_diff = 1.0 / t.sigma_1 - 1.0 / t.sigma_2;
    out.bg_gpi = 0.5 * t.sigma_g * t.sigma_pi * t.sigma_pi * t.sigma_2 * inv_diff * inv_diff;
    return out;
}

double entropic_quadratic_slope(double epsilon) {
    return 0.5 * (std::sqrt(4.0 + epsilon * epsilon) - epsilon);
}

namespace {

// log ∫ e^{expo(x)} dx over a materialized rule, log-sum-exp stabilized.
double log_integral(const QuadratureRule& rule, const std::function<double(double)>& expo) {
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(rule.x.size());
    for (size_t i = 0; i < rule.x.size(); ++i) {
        terms[i] = std::log(rule.w[i]) + expo(rule.x[i]);
        if (terms[i] > m) m = terms[i];
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - m);
    return m + std::log(acc);
}

double sinkhorn_apply_rule(const std::function<double(double)>& psi_value, double epsilon,
                           const Target1D& f, const Target1D& g, const QuadratureRule& outer,
                           const QuadratureRule& inner, double y) {
    const double inv_eps = 1.0 / epsilon;
    const size_t nj = inner.x.size();
    // per-node constants of the inner integrand: log w_j - ψ(y_j)/ε - g(y_j)
    std::vector<double> base(nj), terms(nj);
    for (size_t j = 0; j < nj; ++j)
        base[j] = std::log(inner.w[j]) - psi_value(inner.x[j]) * inv_eps - g.f(inner.x[j]);
    auto log_denominator = [&](double x) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < nj; ++j) {
            terms[j] = x * inner.x[j] * inv_eps + base[j];
            if (terms[j] > m) m = terms[j];
        }
        double acc = 0.0;
        for (size_t j = 0; j < nj; ++j) acc += std::exp(terms[j] - m);
        return m + std::log(acc);
    };
    const double log_num = log_integral(
        outer, [&](double x) { return x * y * inv_eps - log_denominator(x) - f.f(x); });
    return epsilon * log_num;
}

QuadratureSpec refined(QuadratureSpec q) {
    q.panels *= 2;
    q.lo -= 1.0;
    q.hi += 1.0;
    return q;
}

double apply_with_check(const std::function<double(double)>& psi_value, double epsilon,
                        const Target1D& f, const Target1D& g, const SinkhornSpec& spec,
                        double y) {
    const QuadratureRule outer = build_rule(spec.outer);
    const QuadratureRule inner = build_rule(spec.inner);
    const double coarse = sinkhorn_apply_rule(psi_value, epsilon, f, g, outer, inner, y);
    const QuadratureRule outer2 = build_rule(refined(spec.outer));
    const QuadratureRule inner2 = build_rule(refined(spec.inner));
    const double fine = sinkhorn_apply_rule(psi_value, epsilon, f, g, outer2, inner2, y);
    if (std::fabs(fine - coarse) > spec.convergence_tol * epsilon) {
        std::ostringstream msg;
        msg << "sinkhorn quadrature not converged at y=" << y << ": coarse=" << coarse
            << " fine=" << fine;
        throw NumericError(msg.str());
    }
    return fine;
}

}  // namespace

double sinkhorn_apply(const std::function<double(double)>& psi_value, double epsilon,
                      const Target1D& f, const Target1D& g, const SinkhornSpec& spec, double y) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn_apply: epsilon must be > 0");
    return apply_with_check(psi_value, epsilon, f, g, spec, y);
}

double sinkhorn_residual(const PotentialStack& psi, double epsilon, const Target1D& f,
                         const Target1D& g, const SinkhornSpec& spec) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn_residual: epsilon must be > 0");
    auto psi_value = [&psi](double y) { return psi.value(y); };
    double worst = 0.0;
    for (double y : spec.probes) {
        const Jet3 j = psi.jet_eval(y);
        if (!(j.d2 > 0.0)) throw NumericError("sinkhorn_residual: psi not convex at probe");
        const double lhs = (apply_with_check(psi_value, epsilon, f, g, spec, y) - j.v) / epsilon;
        const double rhs = -f.f(j.d1) + g.f(y) + std::log(j.d2);
        worst = std::max(worst, std::fabs(lhs - rhs));
    }
    return worst;
}

double sinkhorn_fixed_point_residual(double epsilon, const SinkhornSpec& spec) {
    const Target1D n01 = standard_normal_target();
    const double a = entropic_quadratic_slope(epsilon);
    auto psi_value = [a](double y) { return 0.5 * a * y * y; };
    double worst = 0.0;
    for (double y : spec.probes) {
        const double v = apply_with_check(psi_value, epsilon, n01, n01, spec, y);
        worst = std::max(worst, std::fabs(v - psi_value(y)) / epsilon);
    }
    return worst;
}

}  // namespace pma
