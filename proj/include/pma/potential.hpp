// Brenier potentials as residual stacks: a quadratic base c0·y²/2 plus
// layers (η_i, Δ_i). Stacks are immutable value types; pushing shares the
// layer storage, so a flow can retain every iterate cheaply.
//
// A residual layer whose declared parent equals the stack prefix beneath it
// is evaluated from the running prefix jet, which keeps a full stack
// evaluation linear in the layer count.
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pma/jet.hpp"
#include "pma/numerics.hpp"

namespace pma {

class PotentialStack;

namespace detail {
// residual-evaluation counter backing the linear-cost assertion
inline std::atomic<uint64_t> residual_eval_count{0};
}  // namespace detail

class Residual {
public:
    virtual ~Residual() = default;

    // Standalone jet of the residual at y (may evaluate a stored parent stack).
    virtual Jet3 eval(double y) const = 0;

    // Jet given the already-computed jet of the parent prefix at y.
    virtual Jet3 eval_from_prefix(double y, const Jet3&) const { return eval(y); }

    // Parent stack this residual closes over, when it has one.
    virtual const PotentialStack* parent() const { return nullptr; }
};

using ResidualPtr = std::shared_ptr<const Residual>;

struct StackEvalError : std::runtime_error {
    size_t layer;
    double y;
    StackEvalError(size_t layer_, double y_)
        : std::runtime_error("non-finite residual at layer " + std::to_string(layer_)),
          layer(layer_),
          y(y_) {}
};

class PotentialStack {
public:
    explicit PotentialStack(double base_coefficient);

    double base_coefficient() const { return c0_; }
    size_t depth() const { return count_; }

    // (ψ(y), ψ'(y), ψ''(y), ψ'''(y))
    Jet3 jet_eval(double y) const;
    double value(double y) const { return jet_eval(y).v; }
    double d1(double y) const { return jet_eval(y).d1; }
    double d2(double y) const { return jet_eval(y).d2; }

    // New stack with one appended layer; *this is left untouched.
    PotentialStack push(ResidualPtr delta, double eta) const;

    double eta_at(size_t layer) const;
    const ResidualPtr& residual_at(size_t layer) const;

    // min over the grid of ψ''
    double convexity_margin(std::span<const double> grid) const;

    // (ψ')^{-1}(x) via safeguarded bisection/Newton; ψ' must be increasing.
    double invert_map(double x, double bracket_lo = -9.0, double bracket_hi = 9.0) const;

    bool same_prefix(const PotentialStack& other) const;

private:
    struct Layer {
        double eta;
        ResidualPtr fn;
        bool use_prefix;
    };
    double c0_;
    std::shared_ptr<std::vector<Layer>> layers_;
    size_t count_ = 0;
};

// Residual wrapping an arbitrary jet-valued function (tests, ad-hoc layers).
ResidualPtr make_fn_residual(std::function<Jet3(double)> fn);

// Residual backed by a fitted cubic spline (exact piecewise-cubic jets).
ResidualPtr make_spline_residual(CubicSpline spline);

// Fit a least-squares spline to fn's values on a uniform grid and wrap it
// as a residual; the projection keeps repeated freeze cycles stable.
ResidualPtr freeze_to_spline(const std::function<double(double)>& fn, double lo, double hi,
                             int nodes, int intervals = 0);

inline void reset_residual_eval_count() { detail::residual_eval_count.store(0); }
inline uint64_t residual_eval_count() { return detail::residual_eval_count.load(); }

}  // namespace pma
