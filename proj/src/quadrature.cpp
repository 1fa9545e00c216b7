#include "pma/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace pma {

namespace {

// Implicit-shift QL eigensolver for a symmetric tridiagonal matrix, tracking
// the first component of each eigenvector (Golub–Welsch quadrature setup).
// diag/off are destroyed; off[i] couples i and i+1.
void tridiag_eigen(std::vector<double>& diag, std::vector<double>& off, std::vector<double>& z) {
    const int n = static_cast<int>(diag.size());
    z.assign(n, 0.0);
    if (n == 0) return;
    z[0] = 1.0;
    off.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::fabs(diag[m]) + std::fabs(diag[m + 1]);
                if (std::fabs(off[m]) <= 1e-15 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60) throw std::runtime_error("tridiag_eigen: no convergence");
                double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
                double r = std::hypot(g, 1.0);
                g = diag[m] - diag[l] + off[l] / (g + (g >= 0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * off[i];
                    const double b = c * off[i];
                    r = std::hypot(f, g);
                    off[i + 1] = r;
                    if (r == 0.0) {
                        diag[i + 1] -= p;
                        off[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = diag[i + 1] - p;
                    r = (diag[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    diag[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && m - 1 >= l) continue;
                diag[l] -= p;
                off[l] = g;
                off[m] = 0.0;
            }
        } while (m != l);
    }
    // Sort ascending by node, carrying z along.
    for (int i = 0; i < n - 1; ++i) {
        int k = i;
        for (int j = i + 1; j < n; ++j)
            if (diag[j] < diag[k]) k = j;
        if (k != i) {
            std::swap(diag[i], diag[k]);
            std::swap(z[i], z[k]);
        }
    }
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    std::vector<double> diag(n, 0.0), off(n - 1), z;
    for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    tridiag_eigen(diag, off, z);
    QuadratureRule rule;
    rule.x = diag;
    rule.w.resize(n);
    for (int i = 0; i < n; ++i) rule.w[i] = 2.0 * z[i] * z[i];
    return rule;
}

QuadratureRule build_rule(const QuadratureSpec& spec) {
    if (spec.nodes < 1 || spec.panels < 1 || !(spec.hi > spec.lo))
        throw std::invalid_argument("build_rule: bad quadrature spec");
    const QuadratureRule base = gauss_legendre(spec.nodes);
    QuadratureRule rule;
    const double span = (spec.hi - spec.lo) / spec.panels;
    rule.x.reserve(static_cast<size_t>(spec.nodes) * spec.panels);
    rule.w.reserve(rule.x.capacity());
    for (int p = 0; p < spec.panels; ++p) {
        const double a = spec.lo + p * span;
        const double mid = a + 0.5 * span, half = 0.5 * span;
        for (int i = 0; i < spec.nodes; ++i) {
            rule.x.push_back(mid + half * base.x[i]);
            rule.w.push_back(half * base.w[i]);
        }
    }
    return rule;
}

double integrate(const QuadratureRule& rule, const std::function<double(double)>& f) {
    double acc = 0.0;
    for (size_t i = 0; i < rule.x.size(); ++i) acc += rule.w[i] * f(rule.x[i]);
    return acc;
}

double integrate(const QuadratureSpec& spec, const std::function<double(double)>& f) {
    return integrate(build_rule(spec), f);
}

QuadratureRule gauss_hermite_normal(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_normal: n must be >= 1");
    // Physicists' Hermite Jacobi matrix: off-diagonal sqrt(k/2).
    std::vector<double> diag(n, 0.0), off(n - 1), z;
    for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(0.5 * k);
    tridiag_eigen(diag, off, z);
    QuadratureRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.x[i] = diag[i] * std::sqrt(2.0);  // node for N(0,1)
        rule.w[i] = z[i] * z[i];               // weights sum to 1
    }
    return rule;
}

}  // namespace pma
