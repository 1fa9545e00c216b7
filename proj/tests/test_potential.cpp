#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "pma/potential.hpp"
#include "pma/rng.hpp"

using namespace pma;

namespace {
ResidualPtr cubic_residual() {
    return make_fn_residual([](double y) { return Jet3{y * y * y, 3 * y * y, 6 * y, 6.0}; });
}
}  // namespace

TEST_CASE("quadratic base jets") {
    PotentialStack base(1.0);
    const Jet3 j = base.jet_eval(2.0);
    CHECK(j.v == doctest::Approx(2.0));
    CHECK(j.d1 == doctest::Approx(2.0));
    CHECK(j.d2 == doctest::Approx(1.0));
    CHECK(j.d3 == doctest::Approx(0.0));
}

TEST_CASE("base plus cubic layer at y=1") {
    PotentialStack psi = PotentialStack(1.0).push(cubic_residual(), 0.5);
    const Jet3 j = psi.jet_eval(1.0);
    CHECK(j.v == doctest::Approx(1.0));
    CHECK(j.d1 == doctest::Approx(2.5));
    CHECK(j.d2 == doctest::Approx(4.0));
    CHECK(j.d3 == doctest::Approx(3.0));
}

TEST_CASE("odd residual leaves the base derivative at zero") {
    PotentialStack psi = PotentialStack(1.5).push(cubic_residual(), 0.25);
    CHECK(psi.jet_eval(0.0).d1 == doctest::Approx(0.0));
}

TEST_CASE("pushing the zero residual changes nothing pointwise") {
    PotentialStack psi(1.3);
    PotentialStack same = psi.push(make_fn_residual([](double) { return Jet3{}; }), 0.7);
    for (double y : {-2.0, -0.3, 0.0, 1.7}) {
        CHECK(same.value(y) == doctest::Approx(psi.value(y)));
        CHECK(same.d2(y) == doctest::Approx(psi.d2(y)));
    }
}

TEST_CASE("push cancelling the base flattens the potential and kills convexity") {
    PotentialStack psi = PotentialStack(1.0).push(
        make_fn_residual([](double y) { return Jet3{-0.5 * y * y, -y, -1.0, 0.0}; }), 1.0);
    const std::array<double, 3> grid{-1.0, 0.0, 1.0};
    CHECK(psi.value(3.0) == doctest::Approx(0.0));
    CHECK(psi.convexity_margin(grid) == doctest::Approx(0.0));
}

TEST_CASE("push leaves the original stack untouched") {
    PotentialStack a(1.0);
    PotentialStack b = a.push(cubic_residual(), 0.5);
    PotentialStack c = a.push(make_fn_residual([](double y) { return Jet3{y, 1, 0, 0}; }), 0.25);
    CHECK(a.depth() == 0);
    CHECK(b.depth() == 1);
    CHECK(c.depth() == 1);
    CHECK(a.value(1.0) == doctest::Approx(0.5));
    CHECK(b.value(1.0) == doctest::Approx(1.0));
    CHECK(c.value(1.0) == doctest::Approx(0.75));
}

TEST_CASE("argument errors") {
    PotentialStack psi(1.0);
    CHECK_THROWS_AS(psi.push(cubic_residual(), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(psi.push(cubic_residual(), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(psi.convexity_margin({}), std::invalid_argument);
}

TEST_CASE("convexity margin on a grid") {
    PotentialStack base(1.0);
    const std::array<double, 3> grid{-1.0, 0.0, 1.0};
    CHECK(base.convexity_margin(grid) == doctest::Approx(1.0));
    PotentialStack psi = base.push(
        make_fn_residual([](double y) { return Jet3{-0.25 * y * y, -0.5 * y, -0.5, 0.0}; }), 1.0);
    CHECK(psi.convexity_margin(grid) == doctest::Approx(0.5));
}

TEST_CASE("pushing two residuals equals pushing their sum") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const double p = rng.uniform(-1, 1), q = rng.uniform(-1, 1);
        auto r1 = make_fn_residual([p](double y) { return Jet3{p * y * y, 2 * p * y, 2 * p, 0}; });
        auto r2 = make_fn_residual([q](double y) { return Jet3{q * std::sin(y), q * std::cos(y),
                                                               -q * std::sin(y), -q * std::cos(y)}; });
        auto sum = make_fn_residual([p, q](double y) {
            return Jet3{p * y * y + q * std::sin(y), 2 * p * y + q * std::cos(y),
                        2 * p - q * std::sin(y), -q * std::cos(y)};
        });
        const double eta = rng.uniform(0.05, 0.5);
        PotentialStack two = PotentialStack(1.0).push(r1, eta).push(r2, eta);
        PotentialStack one = PotentialStack(1.0).push(sum, eta);
        for (double y : {-1.5, 0.2, 2.0}) {
            CHECK(two.value(y) == doctest::Approx(one.value(y)).epsilon(1e-13));
            CHECK(two.d1(y) == doctest::Approx(one.d1(y)).epsilon(1e-13));
        }
    }
}

TEST_CASE("stack evaluation is linear in layer count") {
    PotentialStack psi(1.0);
    const int depth = 24;
    for (int i = 0; i < depth; ++i) psi = psi.push(cubic_residual(), 0.01);
    reset_residual_eval_count();
    psi.jet_eval(0.7);
    CHECK(residual_eval_count() == static_cast<uint64_t>(depth));
}

TEST_CASE("non-finite layer evaluation reports the layer index") {
    PotentialStack psi = PotentialStack(1.0)
                             .push(cubic_residual(), 0.1)
                             .push(make_fn_residual([](double y) {
                                       return Jet3{std::exp(800.0 * (y + 1.0)), 0, 0, 0};
                                   }),
                                   0.1);
    try {
        psi.jet_eval(1.0);
        FAIL("expected StackEvalError");
    } catch (const StackEvalError& e) {
        CHECK(e.layer == 1);
    }
}

TEST_CASE("spline residual reproduces a smooth function and its derivatives") {
    auto fn = [](double y) { return std::sin(1.3 * y) + 0.2 * y * y; };
    ResidualPtr r = freeze_to_spline(fn, -6.0, 6.0, 2400);
    for (double y : {-5.0, -1.1, 0.0, 0.37, 4.9}) {
        const Jet3 j = r->eval(y);
        CHECK(std::fabs(j.v - fn(y)) < 1e-10);
        CHECK(std::fabs(j.d1 - (1.3 * std::cos(1.3 * y) + 0.4 * y)) < 1e-7);
        CHECK(std::fabs(j.d2 - (-1.69 * std::sin(1.3 * y) + 0.4)) < 1e-4);
    }
}

TEST_CASE("monotone map inversion") {
    PotentialStack psi = PotentialStack(2.0).push(
        make_fn_residual([](double y) { return jet_softplus(jet_var(y)); }), 0.5);
    for (double y : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
        const double x = psi.d1(y);
        CHECK(psi.invert_map(x) == doctest::Approx(y).epsilon(1e-9));
    }
}
