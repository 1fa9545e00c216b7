// Gaussian variational inference by fixed-point iteration of the update map
//   G_η(t, s) = ( t − (ηs/λ)·E f'((s/λ)Y + t),
//                 s − (η/λ²)·(s²·E f''((s/λ)Y + t) − 1) ),  Y ~ N(0, λ²),
// with an adaptive step rule that keeps the scale positive and stationarity
// diagnostics E f'(X) and E f''(X) − s⁻² under X ~ N(m, s²).
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pma/numerics.hpp"

namespace pma {

struct VIState {
    double m = 0.0;
    double s = 1.0;
    int k = 0;
};

struct VITargetScalar {
    std::function<double(double)> f1;
    std::function<double(double)> f2;
};

VITargetScalar vi_gaussian_target(double mean, double sd = 1.0);
VITargetScalar vi_logistic_target();

struct VIExpectation {
    enum class Kind { gauss_hermite, monte_carlo } kind = Kind::gauss_hermite;
    int gh_nodes = 64;
    int mc_draws = 1000;
    uint64_t seed = 1;
};

struct VIStepError : NumericError {
    using NumericError::NumericError;
};

// One update; throws VIStepError if the scale would leave (0, ∞).
VIState vi_step(const VIState& state, double eta, double lambda, const VITargetScalar& target,
                const VIExpectation& mc);

// η = ½·s·λ² / (1 + |s²·E f''(sZ+m) − 1|); keeps the next scale positive.
double vi_adaptive_eta(const VIState& prev, double lambda, const VITargetScalar& target,
                       const VIExpectation& mc);

// (E f'(X), E f''(X) − s⁻²) under X ~ N(m, s²); both vanish at the optimum.
std::pair<double, double> stationarity_errors(const VIState& state, const VITargetScalar& target,
                                              const VIExpectation& mc);

struct VIRecord {
    VIState state;
    double eta = 0.0;   // step taken from this state (0 on the final record)
    double err1 = 0.0;
    double err2 = 0.0;
};

struct VIConfig {
    VITargetScalar target;
    double lambda = 1.0;
    double m0 = 10.0;
    double s0 = 1.0;
    int steps = 50;
    bool adaptive = true;
    double eta = 0.5;  // used when adaptive = false
    VIExpectation mc;
};

// Full trajectory including the initial state; deterministic given the seed.
std::vector<VIRecord> vi_run(const VIConfig& cfg);

}  // namespace pma
