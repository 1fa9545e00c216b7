#include "pma/numerics.hpp"

#include <algorithm>
#include <array>

namespace pma {

double invert_increasing(const std::function<double(double)>& f, double target, double lo,
                         double hi, double xtol, const std::function<double(double)>& deriv) {
    if (!(hi > lo)) throw std::invalid_argument("invert_increasing: bad bracket");
    double flo = f(lo), fhi = f(hi);
    double width = hi - lo;
    int expand = 0;
    while (flo > target) {
        lo -= width;
        width *= 2.0;
        flo = f(lo);
        if (++expand > 80) throw NumericError("invert_increasing: bracket expansion failed (low)");
    }
    expand = 0;
    while (fhi < target) {
        hi += width;
        width *= 2.0;
        fhi = f(hi);
        if (++expand > 80) throw NumericError("invert_increasing: bracket expansion failed (high)");
    }
    while (hi - lo > xtol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // ran out of doubles
        if (f(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    if (deriv) {
        for (int it = 0; it < 2; ++it) {
            const double d = deriv(x);
            if (d <= 0.0 || !std::isfinite(d)) break;
            const double step = (f(x) - target) / d;
            const double xn = x - step;
            if (xn >= lo && xn <= hi) x = xn;
        }
    }
    return x;
}

CubicSpline::CubicSpline(double lo, double hi, std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    if (n < 4 || !(hi > lo)) throw std::invalid_argument("CubicSpline: need >= 4 nodes");
    lo_ = lo;
    hi_ = hi;
    h_ = (hi - lo) / (n - 1);
    inv_h_ = 1.0 / h_;

    // Solve for moments m_i = s''(x_i): interior equations
    //   m_{i-1} + 4 m_i + m_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2
    // with not-a-knot ends m_0 - 2 m_1 + m_2 = 0 and the mirrored row.
    std::vector<double> m(n, 0.0);
    {
        const double ih2 = inv_h_ * inv_h_;
        std::vector<double> dl(n, 0.0), dm(n, 0.0), du(n, 0.0), rhs(n, 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            dl[i] = 1.0;
            dm[i] = 4.0;
            du[i] = 1.0;
            rhs[i] = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) * ih2;
        }
        // Fold the not-a-knot relations m0 = 2 m1 - m2 and m_{n-1} = 2 m_{n-2} - m_{n-3}
        // into the adjacent interior rows, then solve the reduced tridiagonal system.
        dm[1] += 2.0 * dl[1];
        du[1] -= dl[1];
        dl[1] = 0.0;
        dm[n - 2] += 2.0 * du[n - 2];
        dl[n - 2] -= du[n - 2];
        du[n - 2] = 0.0;
        for (int i = 2; i + 1 < n; ++i) {
            const double w = dl[i] / dm[i - 1];
            dm[i] -= w * du[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[n - 2] = rhs[n - 2] / dm[n - 2];
        for (int i = n - 3; i >= 1; --i) m[i] = (rhs[i] - du[i] * m[i + 1]) / dm[i];
        m[0] = 2.0 * m[1] - m[2];
        m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    }

    const int pieces = n - 1;
    a_.resize(pieces);
    b_.resize(pieces);
    c_.resize(pieces);
    d_.resize(pieces);
    for (int i = 0; i < pieces; ++i) {
        a_[i] = values[i];
        b_[i] = (values[i + 1] - values[i]) * inv_h_ - h_ * (2.0 * m[i] + m[i + 1]) / 6.0;
        c_[i] = 0.5 * m[i];
        d_[i] = (m[i + 1] - m[i]) / (6.0 * h_);
    }
}

Jet3 CubicSpline::eval(double x) const {
    const int pieces = static_cast<int>(a_.size());
    int i;
    double t;
    if (x <= lo_) {
        i = 0;
        t = x - lo_;
    } else if (x >= hi_) {
        i = pieces - 1;
        t = x - (lo_ + i * h_);
    } else {
        i = static_cast<int>((x - lo_) * inv_h_);
        if (i >= pieces) i = pieces - 1;
        t = x - (lo_ + i * h_);
    }
    double b = b_[i], c = c_[i], d = d_[i];
    if (x < lo_ || x > hi_) {
        // quadratic continuation from the boundary, C^2 at the joint
        const double te = (x < lo_) ? 0.0 : h_;
        const double v0 = ((d_[i] * te + c) * te + b) * te + a_[i];
        const double d1 = (3.0 * d * te + 2.0 * c) * te + b;
        const double d2 = 6.0 * d * te + 2.0 * c;
        const double dt = t - te;
        return {v0 + d1 * dt + 0.5 * d2 * dt * dt, d1 + d2 * dt, d2, 0.0};
    }
    return {((d * t + c) * t + b) * t + a_[i], (3.0 * d * t + 2.0 * c) * t + b,
            6.0 * d * t + 2.0 * c, 6.0 * d};
}

namespace {

// cardinal cubic B-spline pieces on u ∈ [0,1): S = Σ c_{i+j} b_j(u)
inline void bspline_basis(double u, double* b) {
    const double v = 1.0 - u;
    b[0] = v * v * v / 6.0;
    b[1] = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0;
    b[2] = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0;
    b[3] = u * u * u / 6.0;
}
inline void bspline_basis_d1(double u, double* b) {
    const double v = 1.0 - u;
    b[0] = -0.5 * v * v;
    b[1] = 1.5 * u * u - 2.0 * u;
    b[2] = -1.5 * u * u + u + 0.5;
    b[3] = 0.5 * u * u;
}
inline void bspline_basis_d2(double u, double* b) {
    b[0] = 1.0 - u;
    b[1] = 3.0 * u - 2.0;
    b[2] = -3.0 * u + 1.0;
    b[3] = u;
}
inline void bspline_basis_d3(double* b) {
    b[0] = -1.0;
    b[1] = 3.0;
    b[2] = -3.0;
    b[3] = 1.0;
}

}  // namespace

LsqSpline::LsqSpline(const std::function<double(double)>& fn, double lo, double hi, int data_n,
                     int intervals) {
    if (intervals < 4 || data_n < intervals + 3 || !(hi > lo))
        throw std::invalid_argument("LsqSpline: bad grid");
    lo_ = lo;
    hi_ = hi;
    intervals_ = intervals;
    h_ = (hi - lo) / intervals;
    inv_h_ = 1.0 / h_;
    const int m = intervals + 3;  // coefficient count
    constexpr int kBand = 3;      // |i-j| <= 3 couples
    // normal equations in banded symmetric storage: band[d][i] = A(i, i+d)
    std::vector<std::array<double, kBand + 1>> band(m, {0.0, 0.0, 0.0, 0.0});
    std::vector<double> rhs(m, 0.0);
    const double dstep = (hi - lo) / (data_n - 1);
    double basis[4];
    for (int s = 0; s < data_n; ++s) {
        const double x = lo + s * dstep;
        double t = (x - lo) * inv_h_;
        int cell = static_cast<int>(t);
        if (cell >= intervals) cell = intervals - 1;
        const double u = t - cell;
        bspline_basis(u, basis);
        const double y = fn(x);
        for (int a = 0; a < 4; ++a) {
            rhs[cell + a] += basis[a] * y;
            for (int b = a; b < 4; ++b) band[cell + a][b - a] += basis[a] * basis[b];
        }
    }
    // third-difference coefficient penalty: damps sub-knot noise and keeps
    // the edge coefficients conditioned across repeated freeze cycles while
    // reproducing quadratics exactly
    {
        const double lam = 1e-3 * static_cast<double>(data_n) / m;
        const double stencil[4] = {1.0, -3.0, 3.0, -1.0};
        for (int i = 0; i + 3 < m; ++i) {
            for (int a = 0; a < 4; ++a)
                for (int b = a; b < 4; ++b)
                    band[i + a][b - a] += lam * stencil[a] * stencil[b];
        }
    }
    // banded Cholesky (LDLt) solve
    std::vector<std::array<double, kBand + 1>> l(m, {0.0, 0.0, 0.0, 0.0});
    std::vector<double> d(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double di = band[i][0];
        for (int k = std::max(0, i - kBand); k < i; ++k) {
            const double lik = l[k][i - k];
            di -= lik * lik * d[k];
        }
        if (!(di > 0.0)) throw NumericError("LsqSpline: normal equations not positive definite");
        d[i] = di;
        for (int j = i + 1; j <= std::min(m - 1, i + kBand); ++j) {
            double v = band[i][j - i];
            for (int k = std::max(0, j - kBand); k < i; ++k)
                v -= l[k][i - k] * d[k] * l[k][j - k];
            l[i][j - i] = v / di;
        }
    }
    // forward/backward substitution
    std::vector<double> z(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double v = rhs[i];
        for (int k = std::max(0, i - kBand); k < i; ++k) v -= l[k][i - k] * z[k];
        z[i] = v;
    }
    coef_.assign(m, 0.0);
    for (int i = m - 1; i >= 0; --i) {
        double v = z[i] / d[i];
        for (int j = i + 1; j <= std::min(m - 1, i + kBand); ++j) v -= l[i][j - i] * coef_[j];
        coef_[i] = v;
    }
}

Jet3 LsqSpline::eval(double x) const {
    double t = (x - lo_) * inv_h_;
    int cell;
    double u;
    bool inside = true;
    if (t <= 0.0) {
        cell = 0;
        u = 0.0;
        inside = false;
    } else if (t >= intervals_) {
        cell = intervals_ - 1;
        u = 1.0;
        inside = false;
    } else {
        cell = static_cast<int>(t);
        u = t - cell;
    }
    double b0[4], b1[4], b2[4], b3[4];
    bspline_basis(u, b0);
    bspline_basis_d1(u, b1);
    bspline_basis_d2(u, b2);
    bspline_basis_d3(b3);
    Jet3 out;
    for (int a = 0; a < 4; ++a) {
        const double c = coef_[cell + a];
        out.v += c * b0[a];
        out.d1 += c * b1[a];
        out.d2 += c * b2[a];
        out.d3 += c * b3[a];
    }
    out.d1 *= inv_h_;
    out.d2 *= inv_h_ * inv_h_;
    out.d3 *= inv_h_ * inv_h_ * inv_h_;
    if (!inside) {
        // quadratic continuation beyond the knots, C2 at the joint
        const double dt = x - (t <= 0.0 ? lo_ : hi_);
        return {out.v + out.d1 * dt + 0.5 * out.d2 * dt * dt, out.d1 + out.d2 * dt, out.d2, 0.0};
    }
    return out;
}

CumulativeIntegral::CumulativeIntegral(std::function<double(double)> f, double lo, double hi,
                                       int panels, double anchor)
    : f_(std::move(f)), lo_(lo) {
    if (panels < 2 || !(hi > lo)) throw std::invalid_argument("CumulativeIntegral: bad grid");
    h_ = (hi - lo) / panels;
    cum_.resize(panels + 1, 0.0);
    double left = f_(lo);
    for (int i = 0; i < panels; ++i) {
        const double xr = lo + (i + 1) * h_;
        const double mid = f_(xr - 0.5 * h_);
        const double right = f_(xr);
        cum_[i + 1] = cum_[i] + h_ / 6.0 * (left + 4.0 * mid + right);
        left = right;
    }
    anchor_value_ = 0.0;
    anchor_value_ = (*this)(anchor);
}

double CumulativeIntegral::operator()(double y) const {
    const int panels = static_cast<int>(cum_.size()) - 1;
    auto partial = [&](int i, double x) {
        // Simpson from node i to x inside (or beyond) the grid.
        const double xl = lo_ + i * h_;
        const double w = x - xl;
        if (w == 0.0) return 0.0;
        return w / 6.0 * (f_(xl) + 4.0 * f_(xl + 0.5 * w) + f_(x));
    };
    double base;
    if (y <= lo_) {
        base = partial(0, y);
    } else {
        int i = static_cast<int>((y - lo_) / h_);
        if (i > panels) i = panels;
        base = cum_[i] + partial(i, y);
    }
    return base - anchor_value_;
}

}  // namespace pma
