#include "pma/potential.hpp"

#include <cmath>

namespace pma {

PotentialStack::PotentialStack(double base_coefficient) : c0_(base_coefficient) {
    if (!(c0_ > 0.0)) throw std::invalid_argument("PotentialStack: base coefficient must be > 0");
    layers_ = std::make_shared<std::vector<Layer>>();
}

Jet3 PotentialStack::jet_eval(double y) const {
    Jet3 acc{0.5 * c0_ * y * y, c0_ * y, c0_, 0.0};
    for (size_t i = 0; i < count_; ++i) {
        const Layer& layer = (*layers_)[i];
        detail::residual_eval_count.fetch_add(1, std::memory_order_relaxed);
        const Jet3 d = layer.use_prefix ? layer.fn->eval_from_prefix(y, acc) : layer.fn->eval(y);
        if (!jet_finite(d)) throw StackEvalError(i, y);
        acc += layer.eta * d;
    }
    return acc;
}

PotentialStack PotentialStack::push(ResidualPtr delta, double eta) const {
    if (!(eta > 0.0)) throw std::invalid_argument("push_residual: eta must be > 0");
    if (!delta) throw std::invalid_argument("push_residual: null residual");
    PotentialStack out = *this;
    const bool prefix_ok = delta->parent() != nullptr && delta->parent()->same_prefix(*this);
    if (count_ != layers_->size()) {
        // storage is shared with a longer stack; fork the visible prefix
        out.layers_ = std::make_shared<std::vector<Layer>>(layers_->begin(),
                                                           layers_->begin() + count_);
    }
    out.layers_->push_back(Layer{eta, std::move(delta), prefix_ok});
    out.count_ = count_ + 1;
    return out;
}

double PotentialStack::eta_at(size_t layer) const {
    if (layer >= count_) throw std::out_of_range("eta_at");
    return (*layers_)[layer].eta;
}

const ResidualPtr& PotentialStack::residual_at(size_t layer) const {
    if (layer >= count_) throw std::out_of_range("residual_at");
    return (*layers_)[layer].fn;
}

double PotentialStack::convexity_margin(std::span<const double> grid) const {
    if (grid.empty()) throw std::invalid_argument("convexity_margin: empty grid");
    double margin = std::numeric_limits<double>::infinity();
    for (double y : grid) margin = std::min(margin, jet_eval(y).d2);
    return margin;
}

double PotentialStack::invert_map(double x, double bracket_lo, double bracket_hi) const {
    return invert_increasing([this](double y) { return jet_eval(y).d1; }, x, bracket_lo,
                             bracket_hi, 1e-12,
                             [this](double y) { return jet_eval(y).d2; });
}

bool PotentialStack::same_prefix(const PotentialStack& other) const {
    if (c0_ != other.c0_ || count_ != other.count_) return false;
    if (layers_ == other.layers_) return true;
    for (size_t i = 0; i < count_; ++i) {
        const Layer& a = (*layers_)[i];
        const Layer& b = (*other.layers_)[i];
        if (a.fn != b.fn || a.eta != b.eta) return false;
    }
    return true;
}

namespace {

class FnResidual final : public Residual {
public:
    explicit FnResidual(std::function<Jet3(double)> fn) : fn_(std::move(fn)) {}
    Jet3 eval(double y) const override { return fn_(y); }

private:
    std::function<Jet3(double)> fn_;
};

class SplineResidual final : public Residual {
public:
    explicit SplineResidual(CubicSpline s) : spline_(std::move(s)) {}
    Jet3 eval(double y) const override { return spline_.eval(y); }

private:
    CubicSpline spline_;
};

class LsqSplineResidual final : public Residual {
public:
    explicit LsqSplineResidual(LsqSpline s) : spline_(std::move(s)) {}
    Jet3 eval(double y) const override { return spline_.eval(y); }

private:
    LsqSpline spline_;
};

}  // namespace

ResidualPtr make_fn_residual(std::function<Jet3(double)> fn) {
    return std::make_shared<FnResidual>(std::move(fn));
}

ResidualPtr make_spline_residual(CubicSpline spline) {
    return std::make_shared<SplineResidual>(std::move(spline));
}

ResidualPtr freeze_to_spline(const std::function<double(double)>& fn, double lo, double hi,
                             int nodes, int intervals) {
    if (intervals <= 0) intervals = std::max(8, nodes / 6);
    return std::make_shared<LsqSplineResidual>(LsqSpline(fn, lo, hi, nodes, intervals));
}

}  // namespace pma
