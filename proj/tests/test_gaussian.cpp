#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pma/gaussian.hpp"
#include "pma/rng.hpp"

using namespace pma;

TEST_CASE("riccati sigma: closed form vs RK4 oracle") {
    CHECK(riccati_sigma(0.0, 0.5) == doctest::Approx(0.5));
    CHECK(riccati_sigma(1.0, 0.5) == doctest::Approx(0.98786).epsilon(1e-4));
    CHECK(riccati_sigma(1.0, 0.5) == doctest::Approx(riccati_sigma_ode(1.0, 0.5)).epsilon(1e-9));
    CHECK(std::fabs(riccati_sigma(10.0, 0.5) - 1.0) < 1e-8);
    CHECK_THROWS_AS(riccati_sigma(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(riccati_sigma(1.0, 1.2), std::invalid_argument);

    for (double lambda : {0.3, 0.5, 0.8}) {
        for (double t : {0.2, 0.7, 1.5, 3.0}) {
            CHECK(std::fabs(riccati_sigma(t, lambda) - riccati_sigma_ode(t, lambda)) < 1e-6);
        }
    }
}

TEST_CASE("fokker-planck variance: formula vs Euler oracle") {
    CHECK(fokker_planck_sigma_sq(0.0, 0.5) == doctest::Approx(0.25));
    CHECK(fokker_planck_sigma_sq(1.0, 0.5) ==
          doctest::Approx(1.0 - 0.75 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(fokker_planck_sigma_sq(40.0, 0.5) == doctest::Approx(1.0));

    // Ornstein–Uhlenbeck variance ODE: dv/dt = 2(1 - v)
    double v = 0.25;
    const double dt = 1e-6;
    for (int i = 0; i < 1000000; ++i) v += dt * 2.0 * (1.0 - v);
    CHECK(fokker_planck_sigma_sq(1.0, 0.5) == doctest::Approx(v).epsilon(1e-5));
}

TEST_CASE("variance ratio grows with t") {
    CHECK(variance_ratio(0.0, 0.5) == doctest::Approx(1.0));
    // value from the two ODE oracles
    const double s = riccati_sigma_ode(1.0, 0.5);
    const double ratio_oracle = (1.0 - fokker_planck_sigma_sq(1.0, 0.5)) / (1.0 - s * s);
    CHECK(variance_ratio(1.0, 0.5) == doctest::Approx(ratio_oracle).epsilon(1e-6));
    CHECK(variance_ratio(1.0, 0.5) == doctest::Approx(4.2).epsilon(0.025));
    CHECK(variance_ratio(5.0, 0.5) > variance_ratio(4.0, 0.5));
}

TEST_CASE("riccati contraction dominates fokker-planck for t >= 1") {
    for (double lambda : {0.2, 0.4, 0.6, 0.8, 0.95}) {
        for (double t = 1.0; t <= 5.0; t += 0.5) {
            const double s = riccati_sigma(t, lambda);
            CHECK(1.0 - s * s < 1.0 - fokker_planck_sigma_sq(t, lambda));
        }
    }
}

TEST_CASE("discrete gaussian step") {
    CHECK(discrete_gaussian_step(2.0, 0.1, 1.0) == doctest::Approx(1.7));
    CHECK(discrete_gaussian_step(1.0, 0.4, 0.5) == doctest::Approx(2.2));
    CHECK(discrete_gaussian_step(4.0, 0.3, 0.25) == doctest::Approx(4.0));  // fixed point 1/λ
}

TEST_CASE("contraction certificate examples") {
    SUBCASE("issued with computed basin radius") {
        const auto res = contraction_certificate(1.0, 0.4, 1.2, 0.5);
        REQUIRE(res.issued);
        CHECK(res.params.delta == doctest::Approx(0.375));
    }
    SUBCASE("eta outside (0, lambda)") {
        const auto res = contraction_certificate(1.0, 1.5, 1.0, 0.5);
        CHECK_FALSE(res.issued);
        CHECK(res.rejection.find("eta") != std::string::npos);
    }
    SUBCASE("tight basin still admits the fixed point start") {
        const auto res = contraction_certificate(0.5, 0.4, 2.0, 0.7);
        REQUIRE(res.issued);
        CHECK(res.params.delta == doctest::Approx(0.125));
    }
    SUBCASE("upsilon below the contraction threshold") {
        const auto res = contraction_certificate(1.0, 0.4, 1.0, 0.1);
        CHECK_FALSE(res.issued);
        CHECK(res.rejection.find("upsilon") != std::string::npos);
    }
}

TEST_CASE("certified tuples contract geometrically") {
    Rng rng(20240317);
    int checked = 0;
    while (checked < 200) {
        const double lambda = rng.uniform(0.2, 1.0);
        const double eta = rng.uniform(0.02, 0.98) * lambda;
        const double lo = std::fabs(1.0 - 2.0 * eta / lambda);
        const double upsilon = lo + rng.uniform(0.05, 0.95) * (1.0 - lo);
        auto pre = contraction_certificate(lambda, eta, 1.0 / lambda, upsilon);
        REQUIRE(pre.issued);
        const double c0 = 1.0 / lambda + rng.uniform(-0.95, 0.95) * pre.params.delta;
        const auto cert = contraction_certificate(lambda, eta, c0, upsilon);
        REQUIRE(cert.issued);
        ++checked;

        const double target = 1.0 / lambda;
        const double gap0 = std::fabs(c0 - target);
        const double band_lo = (1.0 - upsilon) / (2.0 * eta);
        const double band_hi = (1.0 + upsilon) / (2.0 * eta);
        double c = c0, envelope = gap0;
        double sigma_gap0 = std::fabs(lambda * c0 - 1.0);
        for (int k = 1; k <= 100; ++k) {
            c = discrete_gaussian_step(c, eta, lambda);
            envelope *= upsilon;
            REQUIRE(std::fabs(c - target) <= envelope + 1e-12);
            REQUIRE(c > band_lo - 1e-12);
            REQUIRE(c < band_hi + 1e-12);
            REQUIRE(std::fabs(lambda * c - 1.0) <=
                    sigma_gap0 * std::pow(upsilon, k) + 1e-12);
        }
    }
}

TEST_CASE("gaussian three-point identity closed form") {
    SUBCASE("worked example") {
        const auto t = gaussian_three_point({1.0, 2.0, 1.0, 1.0});
        CHECK(t.lhs == doctest::Approx(0.375));
        CHECK(t.bg_pi_rho1 == doctest::Approx(0.25));
        CHECK(t.bg_pi_rho2 == doctest::Approx(0.0));
        CHECK(t.bg_gpi == doctest::Approx(0.125));
        CHECK(std::fabs(t.residual()) < 1e-15);
    }
    SUBCASE("degenerate sigma1 == sigma2") {
        const auto t = gaussian_three_point({1.3, 0.8, 0.8, 2.0});
        CHECK(t.lhs == doctest::Approx(0.0));
        CHECK(t.bg_gpi == doctest::Approx(0.0));
        CHECK(t.bg_pi_rho1 == doctest::Approx(t.bg_pi_rho2));
    }
    SUBCASE("sigma_pi == sigma_1 kills the lhs factor") {
        const auto t = gaussian_three_point({0.7, 1.4, 0.5, 1.4});
        CHECK(t.lhs == doctest::Approx(0.0));
    }
    SUBCASE("1000 random triples, residual below 1e-12") {
        Rng rng(5150);
        for (int i = 0; i < 1000; ++i) {
            const GaussianTriple t{rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0),
                                   rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0)};
            const auto terms = gaussian_three_point(t);
            REQUIRE(std::fabs(terms.residual()) < 1e-12);
        }
    }
    SUBCASE("argument error") {
        CHECK_THROWS_AS(gaussian_three_point({1.0, -1.0, 1.0, 1.0}), std::invalid_argument);
    }
}

TEST_CASE("relative convexity of KL vs Bregman in gaussian closed form") {
    // KL(π|ρ) ≥ (λ_g/β) B_G(π|ρ) for centered Gaussians with reference scale σ_g
    auto gaussian_kl = [](double s_pi, double s_rho) {
        const double r = s_pi / s_rho;
        return std::log(1.0 / r) + 0.5 * r * r - 0.5;
    };
    SUBCASE("worked example") {
        const double kl = gaussian_kl(1.0, 2.0);
        CHECK(kl == doctest::Approx(0.5 * 0.25 - 0.5 + std::log(2.0)));  // 0.3181...
        const double bg = 0.5 * (1.0 / 2.0) * (1.0 - 2.0) * (1.0 - 2.0);
        CHECK(bg == doctest::Approx(0.25));
        const double gap = kl - (1.0 / 2.0) * bg;
        CHECK(gap == doctest::Approx(0.1931).epsilon(1e-3));
        CHECK(gap > 0.0);
    }
    SUBCASE("1000 random triples") {
        Rng rng(31337);
        for (int i = 0; i < 1000; ++i) {
            const double sg = rng.uniform(0.2, 5.0);
            const double sr = rng.uniform(0.2, 5.0);
            const double sp = rng.uniform(0.2, 5.0);
            const double lambda_g = 1.0 / (sg * sg);
            const double beta = sr / sg;
            const double bg = 0.5 * (sg / sr) * (sp - sr) * (sp - sr);
            const double gap = gaussian_kl(sp, sr) - (lambda_g / beta) * bg;
            REQUIRE(gap >= -1e-6);
        }
    }
}

TEST_CASE("entropic fixed-point slope solves a^2 + a*eps = 1") {
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        const double a = entropic_quadratic_slope(eps);
        CHECK(a * a + a * eps == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(a < 1.0);
    }
}

TEST_CASE("sinkhorn scaling-limit residuals" * doctest::timeout(300)) {
    const Target1D n01 = standard_normal_target();
    const SinkhornSpec spec;
    const std::vector<double> eps_grid{0.2, 0.1, 0.05, 0.025};

    SUBCASE("identity transport: residual decays like the temperature") {
        const PotentialStack id(1.0);
        double prev = 1e9;
        for (double eps : eps_grid) {
            const double r = sinkhorn_residual(id, eps, n01, n01, spec);
            CHECK(r < prev);
            CHECK(r < 1.6 * eps);
            prev = r;
        }
    }

    SUBCASE("quadratic instance: O(eps) decay matching the exact gaussian oracle") {
        // For ψ = c y²/2 between standard normals the rescaling operator has a
        // closed form: Ṽ(y) = ε log[(c+ε)/√(1+cε+ε²)] + y²(c+ε)/(2(1+cε+ε²)).
        const double c = 1.3;
        auto oracle_residual = [&](double eps) {
            const double denom = 1.0 + c * eps + eps * eps;
            const double log_term = std::log((c + eps) / std::sqrt(denom));
            const double ysq_coef = ((c + eps) / denom - c) / (2.0 * eps) + (c * c - 1.0) / 2.0;
            double worst = 0.0;
            for (double y : spec.probes)
                worst = std::max(worst,
                                 std::fabs(log_term - std::log(c) + ysq_coef * y * y));
            return worst;
        };
        const PotentialStack quad(c);
        std::vector<double> res;
        for (double eps : eps_grid) {
            const double r = sinkhorn_residual(quad, eps, n01, n01, spec);
            CHECK(r == doctest::Approx(oracle_residual(eps)).epsilon(1e-4));
            res.push_back(r);
        }
        // monotone decay; the halving ratio climbs toward its asymptotic value 2
        double prev_ratio = 0.0;
        for (size_t i = 1; i < res.size(); ++i) {
            CHECK(res[i] < res[i - 1]);
            const double ratio = res[i - 1] / res[i];
            CHECK(ratio > 1.3);
            CHECK(ratio < 2.5);
            CHECK(ratio > prev_ratio);
            prev_ratio = ratio;
        }
        CHECK(prev_ratio > 1.5);
    }

    SUBCASE("entropic fixed point is reproduced to quadrature accuracy") {
        for (double eps : eps_grid) {
            CHECK(sinkhorn_fixed_point_residual(eps, spec) < 1e-6);
        }
    }

    SUBCASE("symmetric probe stays finite and bounded by the max") {
        const PotentialStack quad(1.3);
        const double v = sinkhorn_apply([](double y) { return 0.65 * y * y; }, 0.1, n01, n01,
                                        spec, 0.0);
        CHECK(std::isfinite(v));
        const double total = sinkhorn_residual(quad, 0.1, n01, n01, spec);
        const double at_zero = std::fabs((v - 0.0) / 0.1 - (-n01.f(0.0) + n01.f(0.0) + std::log(1.3)));
        CHECK(at_zero <= total + 1e-12);
    }
}
