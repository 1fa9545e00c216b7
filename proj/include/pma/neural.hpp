// Scalar softplus MLPs trained from scratch with full-batch Adam: the
// logistic-regression density-ratio learner, the score-matching learner, and
// the derivative-matching distillation student, plus the residual layers that
// splice trained networks into a potential stack.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pma/jet.hpp"
#include "pma/potential.hpp"
#include "pma/rng.hpp"
#include "pma/target.hpp"

namespace pma {

struct StudentNet {
    std::vector<int> widths;  // {1, hidden..., 1}
    std::vector<double> w;    // per layer: weight matrix row-major, then biases

    double forward(double y) const;
    Jet3 forward_jet(double y) const;  // input derivatives to order 3
    size_t param_count() const;
};

StudentNet make_student(const std::vector<int>& hidden, uint64_t init_seed);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_stab = 1e-8;
};

AdamState make_adam(size_t params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                    double eps = 1e-8);

// One bias-corrected update; throws TrainingError on non-finite gradients.
void adam_step(std::vector<double>& weights, const std::vector<double>& grads, AdamState& state);

struct TrainingError : std::runtime_error {
    int epoch;
    TrainingError(const std::string& what, int epoch_)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch_) + ")"), epoch(epoch_) {}
};

struct StudentConfig {
    std::vector<int> hidden{32, 32};
    int epochs = 2000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_stab = 1e-8;
    int early_stop_patience = 50;
    int threads = 0;  // 0 = auto (hardware concurrency, capped at 4)
    double early_stop_tol = 1e-8;
};

// Balanced logistic regression: target samples carry label 0, model samples
// label 1; the trained network estimates log(model density / target density).
StudentNet logistic_fit(const std::vector<double>& target_samples,
                        const std::vector<double>& model_samples, const StudentConfig& cfg,
                        uint64_t rng_seed);

// Score matching through the integrated objective E[σ'(X) + ½ σ(X)²];
// at the optimum σ estimates (log ρ)'.
StudentNet score_fit(const std::vector<double>& samples, const StudentConfig& cfg,
                     uint64_t rng_seed);

// Derivative-matching distillation: minimizes mean (Δ'(Z_j) − stud'(Z_j))²
// over Z_j ~ Unif[lo, hi] from a cold start, then shifts the student output
// so stud(0) = Δ(0).
StudentNet distill(const Residual& delta, const StudentConfig& cfg, int sample_count, double lo,
                   double hi, uint64_t rng_seed);

// Loss+gradient evaluations at fixed parameters (training-path arithmetic);
// used by the fits and by finite-difference oracles in tests.
double logistic_loss_grad(const StudentNet& net, const std::vector<double>& target_samples,
                          const std::vector<double>& model_samples, std::vector<double>* grad);
double score_loss_grad(const StudentNet& net, const std::vector<double>& samples,
                       std::vector<double>* grad);
double distill_loss_grad(const StudentNet& net, const std::vector<double>& zs,
                         const std::vector<double>& deriv_targets, std::vector<double>* grad);

// Residual layers around trained networks.
ResidualPtr make_student_residual(StudentNet net);

// -ĥ ∘ ψ' for the logistic update; jets propagate through the parent prefix.
ResidualPtr make_classifier_residual(StudentNet h, PotentialStack parent);

// Score-matching map update in potential form: Δ'(y) = -ψ''(y)·m̂(ψ'(y))
// with m̂ = σ̂_model − σ̂_target; the value channel is the anchored integral
// of Δ' so the layer stays the derivative's antiderivative.
ResidualPtr make_score_residual(StudentNet model_score, StudentNet target_score,
                                PotentialStack parent, double lo, double hi, int panels);

// One logistic-regression flow update: sample the model, fit ĥ, push -ĥ∘ψ'.
PotentialStack alg1_step(const PotentialStack& psi, const std::vector<double>& target_samples,
                         const Target1D& g_ref, double eta, const StudentConfig& cfg,
                         uint64_t rng_seed);

// One score-matching map update n ← n - η·n'·(m̂∘n) in potential form.
PotentialStack alg2_step(const PotentialStack& psi, const std::vector<double>& target_samples,
                         const Target1D& g_ref, double eta, const StudentConfig& cfg,
                         uint64_t rng_seed);

// Flat CSV dump `layer,row,col,value`; biases use col = fan_in.
void dump_weights_csv(const StudentNet& net, const std::string& path);

}  // namespace pma
