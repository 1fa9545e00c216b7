#include "pma/density.hpp"

#include <cmath>

namespace pma {

std::function<double(double)> quantile_by_bisection(std::function<double(double)> cdf,
                                                    std::function<double(double)> pdf, double lo,
                                                    double hi) {
    return [cdf = std::move(cdf), pdf = std::move(pdf), lo, hi](double u) {
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must be in (0,1)");
        return invert_increasing(cdf, u, lo, hi, 1e-12, pdf);
    };
}

Density1D gaussian_density(double mean, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("gaussian_density: sd must be positive");
    Density1D d;
    d.support_lo = mean - 9.0 * sd;
    d.support_hi = mean + 9.0 * sd;
    const double log_norm = std::log(sd) + 0.5 * std::log(2.0 * M_PI);
    d.log_density = [mean, sd, log_norm](double x) {
        const double z = (x - mean) / sd;
        return -0.5 * z * z - log_norm;
    };
    d.cdf = [mean, sd](double x) { return normal_cdf((x - mean) / sd); };
    d.sf = [mean, sd](double x) { return normal_cdf(-(x - mean) / sd); };
    auto pdf = [d](double x) { return std::exp(d.log_density(x)); };
    d.quantile = quantile_by_bisection(d.cdf, pdf, d.support_lo, d.support_hi);
    // symmetric about the mean
    d.isf = [mean, q = d.quantile](double u) { return 2.0 * mean - q(u); };
    return d;
}

Density1D normal_mixture_density(double a, double b, double w) {
    if (!(w > 0.0 && w < 1.0)) throw std::invalid_argument("normal_mixture_density: weight in (0,1)");
    Density1D d;
    d.support_lo = std::min(a, b) - 9.0;
    d.support_hi = std::max(a, b) + 9.0;
    d.log_density = [a, b, w](double x) {
        // log-sum-exp of the two component logs
        const double la = std::log(w) + normal_log_pdf(x - a);
        const double lb = std::log1p(-w) + normal_log_pdf(x - b);
        const double m = std::max(la, lb);
        return m + std::log(std::exp(la - m) + std::exp(lb - m));
    };
    d.cdf = [a, b, w](double x) { return w * normal_cdf(x - a) + (1.0 - w) * normal_cdf(x - b); };
    d.sf = [a, b, w](double x) { return w * normal_cdf(a - x) + (1.0 - w) * normal_cdf(b - x); };
    auto pdf = [d](double x) { return std::exp(d.log_density(x)); };
    d.quantile = quantile_by_bisection(d.cdf, pdf, d.support_lo, d.support_hi);
    d.isf = [sf = d.sf, pdf, lo = d.support_lo, hi = d.support_hi](double u) {
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("isf: u must be in (0,1)");
        return invert_increasing([sf](double x) { return -sf(x); }, -u, lo, hi, 1e-12, pdf);
    };
    return d;
}

Density1D logistic_density() {
    Density1D d;
    d.support_lo = -30.0;
    d.support_hi = 30.0;
    d.log_density = [](double x) {
        // -x - 2 log(1+e^{-x}), stable in both tails
        const double ax = std::fabs(x);
        return -ax - 2.0 * std::log1p(std::exp(-ax));
    };
    d.cdf = [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : 1.0 - 1.0 / (1.0 + std::exp(x)); };
    d.sf = [cdf = d.cdf](double x) { return cdf(-x); };
    d.quantile = [](double u) {
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must be in (0,1)");
        return std::log(u) - std::log1p(-u);
    };
    d.isf = [q = d.quantile](double u) { return -q(u); };
    return d;
}

double density_mass(const Density1D& d, const QuadratureSpec& spec) {
    return integrate(spec, [&](double x) { return d.pdf(x); });
}

}  // namespace pma
