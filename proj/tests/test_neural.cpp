#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "pma/flow.hpp"
#include "pma/neural.hpp"
#include "pma/quadrature.hpp"
#include "pma/rng.hpp"

using namespace pma;

namespace {

StudentNet softplus_neuron() {
    // one hidden unit, unit weights, zero biases: net(y) = softplus(y)
    StudentNet net;
    net.widths = {1, 1, 1};
    net.w = {1.0, 0.0, 1.0, 0.0};
    return net;
}

std::vector<double> normal_samples(int n, double mean, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> xs(n);
    for (auto& x : xs) x = mean + rng.normal();
    return xs;
}

void check_grad_fd(const StudentNet& net, const std::function<double(const StudentNet&)>& loss,
                   const std::vector<double>& grad) {
    StudentNet probe = net;
    const double h = 1e-5;
    for (size_t i = 0; i < net.w.size(); ++i) {
        probe.w = net.w;
        probe.w[i] += h;
        const double up = loss(probe);
        probe.w[i] = net.w[i] - h;
        const double dn = loss(probe);
        const double fd = (up - dn) / (2.0 * h);
        const double scale = std::max({1e-6, std::fabs(fd), std::fabs(grad[i])});
        REQUIRE(std::fabs(grad[i] - fd) / scale < 1e-4);
    }
}

}  // namespace

TEST_CASE("forward jet of a single softplus neuron at zero") {
    const Jet3 j = softplus_neuron().forward_jet(0.0);
    CHECK(j.v == doctest::Approx(std::log(2.0)));
    CHECK(j.d1 == doctest::Approx(0.5));
    CHECK(j.d2 == doctest::Approx(0.25));
    CHECK(j.d3 == doctest::Approx(0.0));
}

TEST_CASE("zero-weight net is constant") {
    StudentNet net = make_student({8, 8}, 5);
    std::fill(net.w.begin(), net.w.end(), 0.0);
    const Jet3 j = net.forward_jet(1.7);
    CHECK(j.d1 == doctest::Approx(0.0));
    CHECK(j.d2 == doctest::Approx(0.0));
    CHECK(j.d3 == doctest::Approx(0.0));
}

TEST_CASE("forward jet derivatives match finite differences on random nets") {
    for (uint64_t seed : {11u, 22u, 33u}) {
        StudentNet net = make_student({6, 5}, seed);
        Rng rng(seed * 7);
        for (auto& w : net.w) w += 0.3 * rng.normal();
        for (double y : {-1.2, 0.0, 0.9, 2.1}) {
            const Jet3 j = net.forward_jet(y);
            const double h = 1e-4;
            const double fp = net.forward(y + h), fm = net.forward(y - h);
            const double fpp = net.forward(y + 2 * h), fmm = net.forward(y - 2 * h);
            const double f0 = net.forward(y);
            const double d1 = (fp - fm) / (2 * h);
            const double d2 = (fp - 2 * f0 + fm) / (h * h);
            const double d3 = (fpp - 2 * fp + 2 * fm - fmm) / (2 * h * h * h);
            CHECK(std::fabs(j.v - f0) < 1e-12);
            CHECK(std::fabs(j.d1 - d1) / (1 + std::fabs(d1)) < 1e-5);
            CHECK(std::fabs(j.d2 - d2) / (1 + std::fabs(d2)) < 1e-4);
            CHECK(std::fabs(j.d3 - d3) / (1 + std::fabs(d3)) < 1e-2);
        }
    }
}

TEST_CASE("adam update behaviour") {
    std::vector<double> w{1.0, -2.0};
    AdamState st = make_adam(2, 1e-3);
    SUBCASE("zero gradient leaves weights and moments untouched") {
        adam_step(w, {0.0, 0.0}, st);
        CHECK(w[0] == doctest::Approx(1.0));
        CHECK(w[1] == doctest::Approx(-2.0));
        CHECK(st.first_moment[0] == 0.0);
        CHECK(st.step_count == 1);
    }
    SUBCASE("first step moves by about the learning rate") {
        adam_step(w, {0.3, -4.0}, st);
        CHECK(std::fabs(w[0] - 1.0 + 1e-3) < 1e-6);  // -lr * sign-ish
        CHECK(std::fabs(w[1] + 2.0 - 1e-3) < 1e-6);
    }
    SUBCASE("identical inputs give identical outputs") {
        auto w2 = w;
        AdamState st2 = make_adam(2, 1e-3);
        adam_step(w, {0.5, 0.25}, st);
        adam_step(w2, {0.5, 0.25}, st2);
        CHECK(w == w2);
    }
    SUBCASE("non-finite gradient raises a training error") {
        CHECK_THROWS_AS(adam_step(w, {std::nan(""), 0.0}, st), TrainingError);
    }
}

TEST_CASE("loss gradients match central finite differences") {
    const auto targ = normal_samples(24, 0.5, 101);
    const auto model = normal_samples(24, 0.0, 202);
    StudentNet net = make_student({4, 3}, 77);
    Rng rng(9);
    for (auto& w : net.w) w += 0.2 * rng.normal();
    std::vector<double> grad;

    SUBCASE("logistic loss") {
        logistic_loss_grad(net, targ, model, &grad);
        check_grad_fd(net, [&](const StudentNet& n) {
            return logistic_loss_grad(n, targ, model, nullptr);
        }, grad);
    }
    SUBCASE("score-matching loss") {
        score_loss_grad(net, model, &grad);
        check_grad_fd(net, [&](const StudentNet& n) { return score_loss_grad(n, model, nullptr); },
                      grad);
    }
    SUBCASE("derivative-matching loss") {
        std::vector<double> targets(model.size());
        for (size_t i = 0; i < model.size(); ++i) targets[i] = std::sin(model[i]);
        distill_loss_grad(net, model, targets, &grad);
        check_grad_fd(net, [&](const StudentNet& n) {
            return distill_loss_grad(n, model, targets, nullptr);
        }, grad);
    }
}

TEST_CASE("integrated score objective differs from the Fisher objective by a constant") {
    // For σ from any two networks and ρ = N(0,1) with score -x:
    // ½E(σ+x)² and E[σ' + ½σ²] must have equal differences across σ's.
    StudentNet s1 = make_student({6}, 4);
    StudentNet s2 = make_student({6}, 8);
    Rng rng(3);
    for (auto& w : s1.w) w += 0.4 * rng.normal();
    for (auto& w : s2.w) w += 0.4 * rng.normal();
    const QuadratureSpec quad{48, -9.0, 9.0, 9};
    auto fisher = [&](const StudentNet& net) {
        return integrate(quad, [&](double x) {
            const double d = net.forward(x) + x;
            return 0.5 * d * d * normal_pdf(x);
        });
    };
    auto implicit_obj = [&](const StudentNet& net) {
        return integrate(quad, [&](double x) {
            const Jet3 j = net.forward_jet(x);
            return (j.d1 + 0.5 * j.v * j.v) * normal_pdf(x);
        });
    };
    const double lhs = fisher(s1) - fisher(s2);
    const double rhs = implicit_obj(s1) - implicit_obj(s2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("logistic population optimum on a two-point support") {
    // X ∈ {−1, 2}; model puts (p, 1−p), target (q, 1−q); minimize the
    // balanced logistic loss per point by golden-section search.
    const double p = 0.3, q = 0.8;
    auto pointwise_loss = [](double mw, double tw) {
        return [mw, tw](double h) {
            return 0.5 * (mw * std::log1p(std::exp(-h)) + tw * std::log1p(std::exp(h)));
        };
    };
    auto golden_min = [](const std::function<double(double)>& f) {
        double lo = -30.0, hi = 30.0;
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
        while (hi - lo > 1e-10) {
            if (f(c) < f(d)) {
                hi = d;
                d = c;
                c = hi - phi * (hi - lo);
            } else {
                lo = c;
                c = d;
                d = lo + phi * (hi - lo);
            }
        }
        return 0.5 * (lo + hi);
    };
    CHECK(golden_min(pointwise_loss(p, q)) == doctest::Approx(std::log(p / q)).epsilon(1e-6));
    CHECK(golden_min(pointwise_loss(1 - p, 1 - q)) ==
          doctest::Approx(std::log((1 - p) / (1 - q))).epsilon(1e-6));
}

TEST_CASE("training is deterministic given the seed") {
    const auto xs = normal_samples(600, 0.0, 31);
    StudentConfig cfg;
    cfg.epochs = 60;
    const StudentNet a = score_fit(xs, cfg, 123);
    const StudentNet b = score_fit(xs, cfg, 123);
    CHECK(a.w == b.w);
    const StudentNet c = score_fit(xs, cfg, 124);
    CHECK(a.w != c.w);
}

TEST_CASE("logistic fit on equal distributions learns roughly zero" * doctest::timeout(600)) {
    const auto targ = normal_samples(2000, 0.0, 51);
    const auto model = normal_samples(2000, 0.0, 52);
    StudentConfig cfg;
    cfg.epochs = 500;
    const StudentNet h = logistic_fit(targ, model, cfg, 99);
    double mean_abs = 0.0;
    int count = 0;
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        mean_abs += std::fabs(h.forward(x));
        ++count;
    }
    CHECK(mean_abs / count < 0.1);
}

TEST_CASE("logistic fit recovers the gaussian shift log-ratio" * doctest::timeout(600)) {
    // model N(0,1) vs target N(1,1): log(model/target)(x) = 1/2 - x
    const auto targ = normal_samples(5000, 1.0, 61);
    const auto model = normal_samples(5000, 0.0, 62);
    StudentConfig cfg;
    cfg.epochs = 800;
    const StudentNet h = logistic_fit(targ, model, cfg, 7);
    double worst = 0.0;
    for (double x = -2.0; x <= 3.0; x += 0.1)
        worst = std::max(worst, std::fabs(h.forward(x) - (0.5 - x)));
    CHECK(worst < 0.15);
    // optimality against the zero function
    CHECK(logistic_loss_grad(h, targ, model, nullptr) <
          std::log(2.0) - 0.01);  // zero function scores log 2
}

TEST_CASE("score fit recovers gaussian scores" * doctest::timeout(600)) {
    StudentConfig cfg;
    cfg.epochs = 800;
    SUBCASE("standard normal") {
        const auto xs = normal_samples(5000, 0.0, 71);
        const StudentNet s = score_fit(xs, cfg, 8);
        double worst = 0.0;
        for (double x = -2.0; x <= 2.0; x += 0.1)
            worst = std::max(worst, std::fabs(s.forward(x) + x));
        CHECK(worst < 0.15);
        // the zero field scores 0; the fit must do strictly better
        CHECK(score_loss_grad(s, xs, nullptr) < -0.2);
    }
    SUBCASE("shifted mean") {
        const auto xs = normal_samples(5000, 1.5, 72);
        const StudentNet s = score_fit(xs, cfg, 9);
        double worst = 0.0;
        for (double x = -0.5; x <= 3.5; x += 0.1)
            worst = std::max(worst, std::fabs(s.forward(x) - (1.5 - x)));
        CHECK(worst < 0.15);
    }
}

TEST_CASE("distillation") {
    StudentConfig cfg;
    SUBCASE("realizable teacher reaches tiny matching loss") {
        StudentNet teacher = make_student({32, 32}, 404);
        Rng rng(41);
        for (auto& w : teacher.w) w *= 1.5;
        auto res = make_student_residual(teacher);
        cfg.epochs = 2000;
        const StudentNet stud = distill(*res, cfg, 500, -3.0, 3.0, 11);
        std::vector<double> zs;
        std::vector<double> dt;
        Rng zrng(child_seed(11, 0));
        for (int j = 0; j < 500; ++j) {
            const double z = zrng.uniform(-3.0, 3.0);
            zs.push_back(z);
            dt.push_back(teacher.forward_jet(z).d1);
        }
        CHECK(distill_loss_grad(stud, zs, dt, nullptr) < 1e-4);
        // constant pinned at the anchor
        CHECK(stud.forward(0.0) == doctest::Approx(teacher.forward(0.0)).epsilon(1e-10));
    }
    SUBCASE("quadratic target yields a linear derivative") {
        auto res = make_fn_residual([](double y) { return Jet3{0.5 * y * y, y, 1.0, 0.0}; });
        cfg.epochs = 2000;
        const StudentNet stud = distill(*res, cfg, 500, -3.0, 3.0, 13);
        double worst = 0.0;
        for (double y = -3.0; y <= 3.0; y += 0.1)
            worst = std::max(worst, std::fabs(stud.forward_jet(y).d1 - y));
        CHECK(worst < 0.05);
    }
    SUBCASE("bit-identical across reruns") {
        auto res = make_fn_residual([](double y) { return Jet3{std::sin(y), std::cos(y),
                                                               -std::sin(y), -std::cos(y)}; });
        cfg.epochs = 40;
        const StudentNet a = distill(*res, cfg, 64, -3.0, 3.0, 15);
        const StudentNet b = distill(*res, cfg, 64, -3.0, 3.0, 15);
        CHECK(a.w == b.w);
    }
}

TEST_CASE("logistic flow step behaviour" * doctest::timeout(600)) {
    const Target1D ref = standard_normal_target();
    StudentConfig cfg;
    cfg.epochs = 300;
    SUBCASE("fixed point: model equals target in distribution") {
        const auto targ = normal_samples(4000, 0.0, 81);
        const PotentialStack psi(1.0);
        const double eta = 0.2;
        const PotentialStack next = alg1_step(psi, targ, ref, eta, cfg, 17);
        double worst = 0.0;
        for (double y = -3.0; y <= 3.0; y += 0.2)
            worst = std::max(worst, std::fabs(next.value(y) - psi.value(y)));
        CHECK(worst < eta * 0.1);
    }
    SUBCASE("gaussian shift: update direction matches the analytic one") {
        const auto targ = normal_samples(4000, 1.0, 82);
        const PotentialStack psi(1.0);
        const double eta = 0.2;
        const PotentialStack next = alg1_step(psi, targ, ref, eta, cfg, 18);
        // analytic direction: Δ'(y) = -f'(y) + g'(y) = 1 for this pair
        const double move = next.jet_eval(0.0).d1 - psi.jet_eval(0.0).d1;
        CHECK(move > 0.0);
        CHECK(move == doctest::Approx(eta * 1.0).epsilon(0.35));
    }
}

TEST_CASE("score flow step behaviour" * doctest::timeout(600)) {
    const Target1D ref = standard_normal_target();
    SUBCASE("zero mismatch leaves the map unchanged") {
        StudentNet s = make_student({8}, 6);
        const PotentialStack psi(1.3);
        auto residual = make_score_residual(s, s, psi, -9.0, 9.0, 1200);  // m̂ ≡ 0
        const PotentialStack next = psi.push(residual, 0.3);
        for (double y : {-2.0, 0.0, 1.5}) {
            CHECK(next.jet_eval(y).d1 == doctest::Approx(psi.jet_eval(y).d1).epsilon(1e-12));
            CHECK(next.value(y) == doctest::Approx(psi.value(y)).epsilon(1e-12));
        }
    }
    SUBCASE("gaussian scale mismatch moves the slope the analytic way") {
        // model = push of N(0,1) under slope 2 = N(0,4); target N(0,1):
        // drift field is 3y, so the slope must shrink by about 3η
        StudentConfig cfg;
        cfg.epochs = 600;
        const auto targ = normal_samples(5000, 0.0, 91);
        const PotentialStack psi(2.0);
        const double eta = 0.05;
        const PotentialStack next = alg2_step(psi, targ, ref, eta, cfg, 19);
        const double new_slope = next.jet_eval(0.7).d1 / 0.7;
        CHECK(new_slope == doctest::Approx(2.0 - eta * 3.0).epsilon(0.05));
    }
}

TEST_CASE("weight dump round-trips the parameter count") {
    StudentNet net = make_student({3, 2}, 44);
    const std::string path = "/tmp/pma_wdump_test.csv";
    dump_weights_csv(net, path);
    std::ifstream in(path);
    std::string line;
    int rows = -1;  // header
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<int>(net.param_count()));
}
