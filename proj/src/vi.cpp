#include "pma/vi.hpp"

#include <cmath>

#include "pma/quadrature.hpp"
#include "pma/rng.hpp"

namespace pma {

VITargetScalar vi_gaussian_target(double mean, double sd) {
    const double iv = 1.0 / (sd * sd);
    return {[mean, iv](double x) { return (x - mean) * iv; }, [iv](double) { return iv; }};
}

VITargetScalar vi_logistic_target() {
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return {[sigmoid](double x) { return 2.0 * sigmoid(x) - 1.0; },
            [sigmoid](double x) {
                const double s = sigmoid(x);
                return 2.0 * s * (1.0 - s);
            }};
}

namespace {

// E h(s·Z + m), Z ~ N(0,1), by Gauss–Hermite or seeded Monte Carlo. The
// update map's expectation over Y ~ N(0,λ²) of h((s/λ)Y + t) is the same
// object, since (s/λ)Y ~ N(0, s²).
double expect(const std::function<double(double)>& h, double m, double s,
              const VIExpectation& mc, uint64_t stream) {
    if (mc.kind == VIExpectation::Kind::gauss_hermite) {
        static thread_local int cached_nodes = 0;
        static thread_local QuadratureRule rule;
        if (cached_nodes != mc.gh_nodes) {
            rule = gauss_hermite_normal(mc.gh_nodes);
            cached_nodes = mc.gh_nodes;
        }
        double acc = 0.0;
        for (size_t i = 0; i < rule.x.size(); ++i) acc += rule.w[i] * h(m + s * rule.x[i]);
        return acc;
    }
    Rng rng(child_seed(mc.seed, stream));
    double acc = 0.0;
    for (int i = 0; i < mc.mc_draws; ++i) acc += h(m + s * rng.normal());
    return acc / mc.mc_draws;
}

}  // namespace

VIState vi_step(const VIState& state, double eta, double lambda, const VITargetScalar& target,
                const VIExpectation& mc) {
    if (!(state.s > 0.0)) throw VIStepError("vi_step: scale must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("vi_step: eta must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("vi_step: lambda must be positive");
    const uint64_t stream = static_cast<uint64_t>(state.k) * 2;
    const double ef1 = expect(target.f1, state.m, state.s, mc, stream);
    const double ef2 = expect(target.f2, state.m, state.s, mc, stream + 1);
    VIState next;
    next.m = state.m - eta * state.s / lambda * ef1;
    next.s = state.s - eta / (lambda * lambda) * (state.s * state.s * ef2 - 1.0);
    next.k = state.k + 1;
    if (!(next.s > 0.0))
        throw VIStepError("vi_step: scale left (0,inf); use the adaptive step rule");
    return next;
}

double vi_adaptive_eta(const VIState& prev, double lambda, const VITargetScalar& target,
                       const VIExpectation& mc) {
    if (!(prev.s > 0.0)) throw VIStepError("vi_adaptive_eta: scale must be positive");
    const uint64_t stream = static_cast<uint64_t>(prev.k) * 2 + 1;
    const double ef2 = expect(target.f2, prev.m, prev.s, mc, stream);
    const double drift = std::fabs(prev.s * prev.s * ef2 - 1.0);
    // λ² compensates the 1/λ² in the scale update so the next scale stays
    // above s/2; at λ = 1 this is the literal published rule.
    return 0.5 * prev.s * lambda * lambda / (1.0 + drift);
}

std::pair<double, double> stationarity_errors(const VIState& state, const VITargetScalar& target,
                                              const VIExpectation& mc) {
    if (!(state.s > 0.0)) throw VIStepError("stationarity_errors: scale must be positive");
    const uint64_t stream = 1ull << 32;
    const double e1 = expect(target.f1, state.m, state.s, mc, stream + state.k);
    const double e2 = expect(target.f2, state.m, state.s, mc, stream + state.k + 1);
    return {e1, e2 - 1.0 / (state.s * state.s)};
}

std::vector<VIRecord> vi_run(const VIConfig& cfg) {
    if (cfg.steps < 0) throw std::invalid_argument("vi_run: steps must be >= 0");
    std::vector<VIRecord> out;
    out.reserve(cfg.steps + 1);
    VIState state{cfg.m0, cfg.s0, 0};
    for (int k = 0; k < cfg.steps; ++k) {
        const auto [e1, e2] = stationarity_errors(state, cfg.target, cfg.mc);
        const double eta = cfg.adaptive ? vi_adaptive_eta(state, cfg.lambda, cfg.target, cfg.mc)
                                        : cfg.eta;
        out.push_back({state, eta, e1, e2});
        state = vi_step(state, eta, cfg.lambda, cfg.target, cfg.mc);
    }
    const auto [e1, e2] = stationarity_errors(state, cfg.target, cfg.mc);
    out.push_back({state, 0.0, e1, e2});
    return out;
}

}  // namespace pma
