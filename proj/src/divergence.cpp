#include "pma/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "pma/numerics.hpp"

namespace pma {

double kl_quadrature(const Density1D& rho, const Density1D& pi, const QuadratureSpec& quad) {
    const double kl = integrate(quad, [&](double x) {
        const double lr = rho.log_density(x);
        if (lr < -700.0) return 0.0;  // no rho mass here
        const double r = std::exp(lr);
        const double lp = pi.log_density(x);
        if (lp < -700.0 && r > 1e-12)
            throw NumericError("kl_quadrature: pi underflows where rho has mass");
        return r * (lr - lp);
    });
    return std::max(kl, -1e-9);
}

namespace {
constexpr double kLevelFloor = 1e-280;  // keeps bisection targets inside (0,1)
}  // namespace

// Monotone rearrangement composed through whichever tail retains relative
// precision: lower tail via cdf/quantile, upper tail via sf/isf.
BrenierMap1D brenier_map_1d(const Density1D& from, const Density1D& to) {
    BrenierMap1D t;
    t.map = [from, to](double y) {
        const double u = from.cdf(y);
        if (u <= 0.5) return to.quantile(std::max(u, kLevelFloor));
        return to.isf(std::max(from.sf(y), kLevelFloor));
    };
    t.slope = [from, to, map = t.map](double y) {
        return std::exp(from.log_density(y) - to.log_density(map(y)));
    };
    return t;
}

double bregman_bg(const Density1D& rho2, const Density1D& rho1, const Density1D& ref,
                  const QuadratureSpec& quad) {
    const BrenierMap1D t1 = brenier_map_1d(ref, rho1);
    const BrenierMap1D t2 = brenier_map_1d(ref, rho2);
    // ψ_{ρ1}(y) = ∫_0^y T1; composite Simpson on a grid covering the
    // quadrature domain. The anchor constant cancels against the conjugate.
    const double lo = std::min(quad.lo, -1.0), hi = std::max(quad.hi, 1.0);
    CumulativeIntegral psi1(t1.map, lo, hi, 4000, 0.0);
    // conjugate through the inverse map: φ(x) = x·u − ψ(u) with the reverse
    // rearrangement u = T1⁻¹(x) = F_ref⁻¹(F_ρ1(x))
    const BrenierMap1D t1_inv = brenier_map_1d(rho1, ref);
    auto phi1 = [&](double x) {
        const double u = t1_inv(x);
        return x * u - psi1(u);
    };
    const double val = integrate(quad, [&](double y) {
        const double w = ref.pdf(y);
        if (w < 1e-16) return 0.0;
        const double x2 = t2(y);
        return w * (phi1(x2) + psi1(y) - y * x2);
    });
    if (val < -1e-7) throw NumericError("bregman_bg: negative beyond tolerance");
    return val;
}

double w2_1d(const Density1D& rho, const Density1D& pi, const QuadratureSpec& quad) {
    // ∫ (x − F_π⁻¹(F_ρ(x)))² ρ(x) dx, the quantile coupling written in x-space
    const BrenierMap1D t = brenier_map_1d(rho, pi);
    const double sq = integrate(quad, [&](double x) {
        const double w = rho.pdf(x);
        if (w < 1e-16) return 0.0;
        const double d = x - t(x);
        return w * d * d;
    });
    return std::sqrt(std::max(sq, 0.0));
}

double relative_convexity_gap(const Density1D& pi, const Density1D& rho, const Density1D& g_ref,
                              double lambda_g, double beta, const QuadratureSpec& quad) {
    const double kl = kl_quadrature(pi, rho, quad);
    QuadratureSpec ref_quad = quad;
    ref_quad.lo = g_ref.support_lo;
    ref_quad.hi = g_ref.support_hi;
    const double bg = bregman_bg(pi, rho, g_ref, ref_quad);
    return kl - (lambda_g / beta) * bg;
}

namespace {
double gauss_kernel(double a, double b, double inv_two_bw_sq) {
    const double d = a - b;
    return std::exp(-d * d * inv_two_bw_sq);
}
}  // namespace

double mmd_sq(const std::vector<double>& xs, const std::vector<double>& ys, double bandwidth) {
    if (xs.size() < 2 || ys.size() < 2) throw std::invalid_argument("mmd_sq: need >= 2 samples");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_sq: bandwidth must be positive");
    const double c = 0.5 / (bandwidth * bandwidth);
    const size_t m = xs.size(), n = ys.size();
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j) sxx += gauss_kernel(xs[i], xs[j], c);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) syy += gauss_kernel(ys[i], ys[j], c);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) sxy += gauss_kernel(xs[i], ys[j], c);
    return 2.0 * sxx / (double(m) * (m - 1)) + 2.0 * syy / (double(n) * (n - 1)) -
           2.0 * sxy / (double(m) * n);
}

double mmd_sq_biased(const std::vector<double>& xs, const std::vector<double>& ys,
                     double bandwidth) {
    if (xs.empty() || ys.empty()) throw std::invalid_argument("mmd_sq_biased: empty sample");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_sq_biased: bandwidth must be positive");
    const double c = 0.5 / (bandwidth * bandwidth);
    const size_t m = xs.size(), n = ys.size();
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) sxx += gauss_kernel(xs[i], xs[j], c);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) syy += gauss_kernel(ys[i], ys[j], c);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) sxy += gauss_kernel(xs[i], ys[j], c);
    return sxx / (double(m) * m) + syy / (double(n) * n) - 2.0 * sxy / (double(m) * n);
}

double median_heuristic_bandwidth(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<double> pooled;
    pooled.reserve(xs.size() + ys.size());
    pooled.insert(pooled.end(), xs.begin(), xs.end());
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    const size_t n = pooled.size();
    std::vector<double> dists;
    if (n <= 2000) {
        dists.reserve(n * (n - 1) / 2);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) dists.push_back(std::fabs(pooled[i] - pooled[j]));
    } else {
        // pair subsample keeps the heuristic O(1) on large inputs
        Rng rng(0x6d656469616eULL ^ n);
        dists.reserve(2000000);
        while (dists.size() < 2000000) {
            const size_t i = rng.below(n), j = rng.below(n);
            if (i != j) dists.push_back(std::fabs(pooled[i] - pooled[j]));
        }
    }
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

PermutationTestResult mmd_permutation_test(const std::vector<double>& xs,
                                           const std::vector<double>& ys, double bandwidth,
                                           int permutations, uint64_t seed) {
    if (!(bandwidth > 0.0))
        throw std::invalid_argument("mmd_permutation_test: bandwidth must be positive");
    if (permutations < 1) throw std::invalid_argument("mmd_permutation_test: need permutations");
    const size_t m = xs.size(), n = ys.size();
    const size_t total = m + n;
    std::vector<double> pooled;
    pooled.reserve(total);
    pooled.insert(pooled.end(), xs.begin(), xs.end());
    pooled.insert(pooled.end(), ys.begin(), ys.end());

    // packed upper-triangle kernel matrix in float, row-major so the inner
    // pair loops read sequentially
    const double c = 0.5 / (bandwidth * bandwidth);
    std::vector<float> K(total * (total - 1) / 2);
    {
        size_t idx = 0;
        for (size_t i = 0; i < total; ++i)
            for (size_t j = i + 1; j < total; ++j)
                K[idx++] = static_cast<float>(gauss_kernel(pooled[i], pooled[j], c));
    }
    double grand = 0.0;
    for (float v : K) grand += v;

    auto within_sum = [&](const std::vector<uint32_t>& idx) {
        double acc = 0.0;
        for (size_t a = 0; a < idx.size(); ++a) {
            const size_t i = idx[a];
            const float* row = K.data() + i * (2 * total - i - 1) / 2;  // entry (i, i+1)
            for (size_t b = a + 1; b < idx.size(); ++b) acc += row[idx[b] - i - 1];
        }
        return acc;
    };
    auto stat_for = [&](const std::vector<uint32_t>& x_idx, const std::vector<uint32_t>& y_idx) {
        const double sxx = within_sum(x_idx);
        const double syy = within_sum(y_idx);
        const double sxy = grand - sxx - syy;
        return 2.0 * sxx / (double(m) * (m - 1)) + 2.0 * syy / (double(n) * (n - 1)) -
               2.0 * sxy / (double(m) * n);
    };

    std::vector<uint32_t> x_idx(m), y_idx(n);
    for (size_t i = 0; i < m; ++i) x_idx[i] = static_cast<uint32_t>(i);
    for (size_t j = 0; j < n; ++j) y_idx[j] = static_cast<uint32_t>(m + j);
    PermutationTestResult res;
    res.observed = stat_for(x_idx, y_idx);

    Rng rng(seed);
    std::vector<uint32_t> perm(total);
    for (size_t i = 0; i < total; ++i) perm[i] = static_cast<uint32_t>(i);
    std::vector<double> null_stats;
    null_stats.reserve(permutations);
    int at_least = 0;
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(perm);
        std::vector<uint32_t> px(perm.begin(), perm.begin() + m);
        std::vector<uint32_t> py(perm.begin() + m, perm.end());
        std::sort(px.begin(), px.end());
        std::sort(py.begin(), py.end());
        const double s = stat_for(px, py);
        null_stats.push_back(s);
        if (s >= res.observed) ++at_least;
    }
    res.p_value = (1.0 + at_least) / (1.0 + permutations);
    std::sort(null_stats.begin(), null_stats.end());
    auto quantile = [&](double q) {
        const size_t k = std::min(null_stats.size() - 1,
                                  static_cast<size_t>(q * (null_stats.size() - 1) + 0.5));
        return null_stats[k];
    };
    res.quantile_95 = quantile(0.95);
    res.quantile_99 = quantile(0.99);
    return res;
}

}  // namespace pma
