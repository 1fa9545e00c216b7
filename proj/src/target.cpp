#include "pma/target.hpp"

#include <cmath>

namespace pma {

Target1D gaussian_target(double mean, double sd) {
    Target1D t;
    const double isd2 = 1.0 / (sd * sd);
    const double log_norm = std::log(sd) + 0.5 * std::log(2.0 * M_PI);
    t.f = [mean, isd2, log_norm](double x) {
        return 0.5 * (x - mean) * (x - mean) * isd2 + log_norm;
    };
    t.f1 = [mean, isd2](double x) { return (x - mean) * isd2; };
    t.f2 = [isd2](double) { return isd2; };
    t.f3 = [](double) { return 0.0; };
    t.sampler = [mean, sd](Rng& rng) { return mean + sd * rng.normal(); };
    t.density = gaussian_density(mean, sd);
    return t;
}

Target1D mixture_target(double a, double b, double w) {
    Target1D t;
    t.density = normal_mixture_density(a, b, w);
    const auto logd = t.density.log_density;
    t.f = [logd](double x) { return -logd(x); };
    // With r(x) = posterior weight of the first component,
    //   f'   = x - a r - b (1-r),        r' = (a-b) r (1-r)
    //   f''  = 1 - (a-b)^2 r (1-r)
    //   f''' = -(a-b)^3 r (1-r) (1-2r)
    auto post = [a, b, w](double x) {
        const double la = std::log(w) + normal_log_pdf(x - a);
        const double lb = std::log1p(-w) + normal_log_pdf(x - b);
        return 1.0 / (1.0 + std::exp(lb - la));
    };
    t.f1 = [a, b, post](double x) {
        const double r = post(x);
        return x - a * r - b * (1.0 - r);
    };
    const double ab = a - b;
    t.f2 = [ab, post](double x) {
        const double r = post(x);
        return 1.0 - ab * ab * r * (1.0 - r);
    };
    t.f3 = [ab, post](double x) {
        const double r = post(x);
        return -ab * ab * ab * r * (1.0 - r) * (1.0 - 2.0 * r);
    };
    t.sampler = [a, b, w](Rng& rng) {
        const double mean = rng.uniform() < w ? a : b;
        return mean + rng.normal();
    };
    return t;
}

}  // namespace pma
