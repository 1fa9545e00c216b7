// The discretized parabolic Monge-Ampère flow in one dimension: analytic
// oracle updates Δ = -f∘ψ' + g + log ψ'', step-size schedules, distillation,
// learner-driven updates, block-wise reference refresh, and per-step
// diagnostic traces.
#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pma/divergence.hpp"
#include "pma/neural.hpp"
#include "pma/potential.hpp"
#include "pma/target.hpp"

namespace pma {

struct ConvexityError : NumericError {
    double y;
    explicit ConvexityError(double y_)
        : NumericError("potential not convex at y=" + std::to_string(y_)), y(y_) {}
};

// Analytic update direction Δ(y) = -f(ψ'(y)) + g(y) + log ψ''(y) as a
// residual closing over its parent stack; jets propagate through the parent
// prefix (the 4th parent derivative is not carried and enters as zero).
ResidualPtr make_oracle_delta(PotentialStack parent, Target1D target, Target1D reference);

// Jet of the oracle update direction at y.
Jet3 oracle_delta(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                  double y);

// ξ(y) = d/dy[(f + log ρ)(ψ'(y))] = -Δ'(y); the mirror-descent drift field.
double xi_field(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                double y);

// ∫ ξ(y)² π(y) dy with π the pullback of the target through the map inverse,
// π(y) = e^{-f(ψ'(y))}·ψ''(y).
double xi_l2_norm(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                  const QuadratureSpec& quad);

enum class AdaptiveMode { min_rule, paper_max };

// Step size from the grid curvature ratios -ψ''/Δ'' over points with Δ'' < 0.
// min_rule:   safety·min(min ratio, floor)  — keeps ψ'' positive on the grid;
// paper_max:  safety·max(max ratio, floor)  — the literal published formula.
// With no negative-curvature point both return safety·floor.
double adaptive_step(const PotentialStack& psi, const Residual& delta,
                     std::span<const double> grid, double floor_eta, double safety,
                     AdaptiveMode mode);

struct ConstantEta {
    double eta;
};
struct InverseSqrtT {
    int horizon;  // eta_k = horizon^{-1/2}
};
struct LogEta {
    double lambda;
    double smooth;  // eta_k = smooth / ((k+1)·lambda)
};
struct LastIterateEta {
    double c;
    double smooth;
    double lambda;
    double b0;    // initial Bregman divergence to the target
    int horizon;  // eta = c·smooth·b0·log(T)/(lambda·T)
};
struct AdaptiveEta {
    double floor_eta = 0.4;
    double safety = 0.5;
    AdaptiveMode mode = AdaptiveMode::min_rule;
};

using StepSchedule = std::variant<ConstantEta, InverseSqrtT, LogEta, LastIterateEta, AdaptiveEta>;

std::string schedule_name(const StepSchedule& s);

enum class FlowLearner { oracle, logistic, score };

struct FlowConfig {
    Target1D target;
    Target1D reference;
    StepSchedule schedule = AdaptiveEta{};
    int steps = 10;
    std::vector<double> grid;  // step-size/convexity grid; default 1000 points on [-3,3]
    FlowLearner learner = FlowLearner::oracle;
    bool distill = false;
    uint64_t rng_seed = 1;

    QuadratureSpec diag_quad{32, -8.0, 8.0, 8};
    double work_lo = -9.0;  // oracle freeze / score antiderivative domain
    double work_hi = 9.0;
    int freeze_nodes = 3601;
    // Oracle layers are projected onto a spline space whose knot spacing
    // tracks the explicit-step stability limit ~ sqrt(eta); 0 freezes at the
    // finest resolution instead. The layer constant is pinned so the
    // reference-mean of the update matches the analytic direction exactly.
    double freeze_stability_scale = 2.2;
    int freeze_min_intervals = 12;
    int freeze_max_intervals = 600;
    std::vector<double> guard_grid;  // convexity guard; default 1200 pts on [-8.5, 8.5]

    StudentConfig student;      // distillation student
    StudentConfig learner_cfg;  // logistic/score training
    int distill_samples = 500;
    double distill_lo = -3.0;
    double distill_hi = 3.0;
    int sample_count = 10000;  // n per learner fit

    bool compute_bg = true;
    bool compute_mmd = false;
    int mmd_samples = 2000;
    int block_size = 0;  // > 0: refresh the reference from model samples every block_size steps
};

std::vector<double> default_grid(double lo = -3.0, double hi = 3.0, int points = 1000);

struct FlowRecord {
    int k = 0;
    double eta = 0.0;
    double kl = 0.0;        // KL(ρ_k | target) before the step
    double bg = 0.0;        // B_G(target | ρ_k), NaN when disabled
    double min_hess = 0.0;  // convexity margin on the grid
    double sup_map_err = 0.0;
    double mmd = 0.0;  // NaN when disabled
    double avg_identity_residual = 0.0;  // |E[ψ_{k+1}-ψ_k] + η_k·KL_k|
};

// Composition of the per-block potential maps; one block for plain runs.
struct MapChain {
    std::vector<PotentialStack> blocks;
    Jet3 map_jet(double y) const;
    double map(double y) const { return map_jet(y).v; }
};

struct FlowTrace {
    std::vector<FlowRecord> records;
    std::vector<PotentialStack> iterates;  // iterates of the current block
    MapChain final_map;
    double final_kl = 0.0;
    double final_map_err = 0.0;
    double final_min_hess = 0.0;
    std::string error;  // nonempty when the run stopped early
};

FlowTrace flow_run(const FlowConfig& cfg);

// Block-refresh variant: every block_size steps the model samples become the
// new reference (sample access only) and the potential restarts at identity;
// diagnostics continue on the composed map. Requires the logistic learner.
FlowTrace block_refresh_run(FlowConfig cfg, int block_size);

struct RegretReport {
    double regret_sum = 0.0;
    std::vector<double> per_step;
};
RegretReport regret_report(const FlowTrace& trace, double comparator_kl);

// One analytic flow step under the given schedule; returns the new stack and
// the step size used.
std::pair<PotentialStack, double> oracle_step(const PotentialStack& psi, const Target1D& target,
                                              const Target1D& reference,
                                              const StepSchedule& schedule,
                                              std::span<const double> grid, int k = 0);

// KL(ρ | target) for the pushforward of the reference through the map chain,
// computed in reference coordinates.
double pushforward_kl(const MapChain& chain, const Target1D& target, const Target1D& reference,
                      const QuadratureSpec& quad);

// B_G(target | ρ) through the transport representation, using the potential
// stack itself as the transport potential.
double pushforward_bg(const PotentialStack& psi, const Target1D& target,
                      const Target1D& reference, const QuadratureSpec& quad);

// Pushforward density value at x (inverts the map).
double pushforward_density(const MapChain& chain, const Target1D& reference, double x,
                           double bracket_lo = -12.0, double bracket_hi = 12.0);

void write_trace_csv(const FlowTrace& trace, const std::string& path);

}  // namespace pma
