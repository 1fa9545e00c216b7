#include "pma/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pma {

namespace {

class OracleDelta final : public Residual {
public:
    OracleDelta(PotentialStack parent, Target1D target, Target1D reference)
        : parent_(std::move(parent)), target_(std::move(target)), ref_(std::move(reference)) {}

    Jet3 eval(double y) const override { return eval_from_prefix(y, parent_.jet_eval(y)); }

    Jet3 eval_from_prefix(double y, const Jet3& pre) const override {
        if (!(pre.d2 > 0.0)) throw ConvexityError(y);
        const Jet3 map{pre.d1, pre.d2, pre.d3, 0.0};
        const Jet3 gj{ref_.f(y), ref_.f1(y), ref_.f2(y), ref_.f3(y)};
        const Jet3 hess{pre.d2, pre.d3, 0.0, 0.0};
        return -target_.f_jet(map) + gj + jet_log(hess);
    }
    const PotentialStack* parent() const override { return &parent_; }

private:
    PotentialStack parent_;
    Target1D target_;
    Target1D ref_;
};

}  // namespace

ResidualPtr make_oracle_delta(PotentialStack parent, Target1D target, Target1D reference) {
    return std::make_shared<OracleDelta>(std::move(parent), std::move(target),
                                         std::move(reference));
}

namespace {

class ShiftedResidual final : public Residual {
public:
    ShiftedResidual(ResidualPtr inner, double shift) : inner_(std::move(inner)), shift_(shift) {}
    Jet3 eval(double y) const override {
        Jet3 j = inner_->eval(y);
        j.v += shift_;
        return j;
    }
    Jet3 eval_from_prefix(double y, const Jet3& pre) const override {
        Jet3 j = inner_->eval_from_prefix(y, pre);
        j.v += shift_;
        return j;
    }
    const PotentialStack* parent() const override { return inner_->parent(); }

private:
    ResidualPtr inner_;
    double shift_;
};

}  // namespace

Jet3 oracle_delta(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                  double y) {
    return OracleDelta(psi, target, reference).eval(y);
}

double xi_field(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                double y) {
    return -oracle_delta(psi, target, reference, y).d1;
}

double xi_l2_norm(const PotentialStack& psi, const Target1D& target, const Target1D& reference,
                  const QuadratureSpec& quad) {
    const OracleDelta delta(psi, target, reference);
    return integrate(quad, [&](double y) {
        const Jet3 pre = psi.jet_eval(y);
        const double xi = -delta.eval_from_prefix(y, pre).d1;
        const double pullback = std::exp(-target.f(pre.d1)) * pre.d2;
        return xi * xi * pullback;
    });
}

double adaptive_step(const PotentialStack& psi, const Residual& delta,
                     std::span<const double> grid, double floor_eta, double safety,
                     AdaptiveMode mode) {
    if (grid.empty()) throw std::invalid_argument("adaptive_step: empty grid");
    bool any = false;
    double ratio = 0.0;
    for (double a : grid) {
        const Jet3 pre = psi.jet_eval(a);
        const Jet3 d = delta.eval_from_prefix(a, pre);
        if (d.d2 < 0.0) {
            const double r = -pre.d2 / d.d2;
            if (!any) {
                ratio = r;
                any = true;
            } else {
                ratio = mode == AdaptiveMode::min_rule ? std::min(ratio, r) : std::max(ratio, r);
            }
        }
    }
    if (!any) return safety * floor_eta;
    return mode == AdaptiveMode::min_rule ? safety * std::min(ratio, floor_eta)
                                          : safety * std::max(ratio, floor_eta);
}

std::string schedule_name(const StepSchedule& s) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ConstantEta>) return "constant";
            if constexpr (std::is_same_v<T, InverseSqrtT>) return "inverse-sqrt-t";
            if constexpr (std::is_same_v<T, LogEta>) return "logarithmic";
            if constexpr (std::is_same_v<T, LastIterateEta>) return "last-iterate";
            if constexpr (std::is_same_v<T, AdaptiveEta>) return "adaptive";
        },
        s);
}

std::vector<double> default_grid(double lo, double hi, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

Jet3 MapChain::map_jet(double y) const {
    Jet3 cur = jet_var(y);
    for (const auto& stack : blocks) {
        const Jet3 p = stack.jet_eval(cur.v);
        cur = jet_compose(p.d1, p.d2, p.d3, 0.0, cur);
    }
    return cur;
}

double pushforward_kl(const MapChain& chain, const Target1D& target, const Target1D& reference,
                      const QuadratureSpec& quad) {
    const double kl = integrate(quad, [&](double y) {
        const double w = std::exp(-reference.f(y));
        if (w < 1e-300) return 0.0;
        const Jet3 m = chain.map_jet(y);
        if (!(m.d1 > 0.0)) throw ConvexityError(y);
        return w * (target.f(m.v) - reference.f(y) - std::log(m.d1));
    });
    return std::max(kl, -1e-9);
}

double pushforward_bg(const PotentialStack& psi, const Target1D& target,
                      const Target1D& reference, const QuadratureSpec& quad) {
    // B_G(target|ρ) = E_Y[φ_ρ(T*(Y)) + ψ(Y) − Y·T*(Y)] with T* the true map
    // and φ_ρ the conjugate of the stack, φ_ρ(x) = x·u − ψ(u), u = (ψ')⁻¹(x).
    const BrenierMap1D t_star = brenier_map_1d(reference.density, target.density);
    return integrate(quad, [&](double y) {
        const double w = std::exp(-reference.f(y));
        if (w < 1e-14) return 0.0;
        const double x = t_star(y);
        const double u = psi.invert_map(x, quad.lo, quad.hi);
        const double phi = x * u - psi.value(u);
        return w * (phi + psi.value(y) - y * x);
    });
}

double pushforward_density(const MapChain& chain, const Target1D& reference, double x,
                           double bracket_lo, double bracket_hi) {
    const double y = invert_increasing([&](double t) { return chain.map(t); }, x, bracket_lo,
                                       bracket_hi, 1e-12,
                                       [&](double t) { return chain.map_jet(t).d1; });
    const Jet3 m = chain.map_jet(y);
    if (!(m.d1 > 0.0)) throw ConvexityError(y);
    return std::exp(-reference.f(y)) / m.d1;
}

namespace {

struct Diagnostics {
    const FlowConfig& cfg;
    std::vector<double> map_star_grid;       // true map on the step grid
    QuadratureRule diag_rule;
    std::vector<double> map_star_nodes;      // true map at diagnostic nodes
    std::vector<double> ref_weight_nodes;    // e^{-g} at diagnostic nodes

    explicit Diagnostics(const FlowConfig& c) : cfg(c), diag_rule(build_rule(c.diag_quad)) {
        const BrenierMap1D t_star = brenier_map_1d(c.reference.density, c.target.density);
        map_star_grid.reserve(cfg.grid.size());
        for (double y : cfg.grid) map_star_grid.push_back(t_star(y));
        map_star_nodes.reserve(diag_rule.x.size());
        ref_weight_nodes.reserve(diag_rule.x.size());
        for (double y : diag_rule.x) {
            map_star_nodes.push_back(t_star(y));
            ref_weight_nodes.push_back(std::exp(-c.reference.f(y)));
        }
    }

    double kl(const MapChain& chain) const {
        double acc = 0.0;
        for (size_t i = 0; i < diag_rule.x.size(); ++i) {
            const double w = ref_weight_nodes[i];
            if (w < 1e-300) continue;
            const double y = diag_rule.x[i];
            const Jet3 m = chain.map_jet(y);
            if (!(m.d1 > 0.0)) throw ConvexityError(y);
            acc += diag_rule.w[i] * w * (cfg.target.f(m.v) - cfg.reference.f(y) - std::log(m.d1));
        }
        return std::max(acc, -1e-9);
    }

    // single-block Bregman divergence to the target
    double bg(const PotentialStack& psi) const {
        double acc = 0.0;
        for (size_t i = 0; i < diag_rule.x.size(); ++i) {
            const double w = ref_weight_nodes[i];
            if (w < 1e-14) continue;
            const double y = diag_rule.x[i];
            const double x = map_star_nodes[i];
            const double u = psi.invert_map(x, cfg.diag_quad.lo, cfg.diag_quad.hi);
            acc += diag_rule.w[i] * w * (x * u - psi.value(u) + psi.value(y) - y * x);
        }
        return acc;
    }

    double sup_map_err(const MapChain& chain) const {
        double worst = 0.0;
        for (size_t i = 0; i < cfg.grid.size(); ++i)
            worst = std::max(worst, std::fabs(chain.map(cfg.grid[i]) - map_star_grid[i]));
        return worst;
    }

    // E_{ρ_prev}[ψ_next − ψ_cur] = ∫ (ψ_next − ψ_cur)(C_prev(y)) e^{-g(y)} dy
    double mean_potential_gap(const MapChain& prev_chain, const PotentialStack& cur,
                              const PotentialStack& next) const {
        double acc = 0.0;
        for (size_t i = 0; i < diag_rule.x.size(); ++i) {
            const double w = ref_weight_nodes[i];
            if (w < 1e-300) continue;
            double y = diag_rule.x[i];
            for (const auto& b : prev_chain.blocks) y = b.jet_eval(y).d1;
            acc += diag_rule.w[i] * w * (next.value(y) - cur.value(y));
        }
        return acc;
    }
};

double resolve_eta(const StepSchedule& schedule, int k, const PotentialStack& psi,
                   const Residual& delta, std::span<const double> grid) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConstantEta>) {
                return s.eta;
            } else if constexpr (std::is_same_v<T, InverseSqrtT>) {
                return 1.0 / std::sqrt(static_cast<double>(s.horizon));
            } else if constexpr (std::is_same_v<T, LogEta>) {
                return s.smooth / ((k + 1) * s.lambda);
            } else if constexpr (std::is_same_v<T, LastIterateEta>) {
                return s.c * s.smooth * s.b0 * std::log(static_cast<double>(s.horizon)) /
                       (s.lambda * s.horizon);
            } else {
                return adaptive_step(psi, delta, grid, s.floor_eta, s.safety, s.mode);
            }
        },
        schedule);
}

}  // namespace

FlowTrace flow_run(const FlowConfig& cfg_in) {
    FlowConfig cfg = cfg_in;
    if (cfg.grid.empty()) cfg.grid = default_grid();
    if (cfg.steps < 1) throw std::invalid_argument("flow_run: steps must be >= 1");
    if (cfg.block_size > 0 && cfg.learner != FlowLearner::logistic)
        throw std::invalid_argument("flow_run: block refresh requires the logistic learner");

    Diagnostics diag(cfg);
    std::vector<double> guard = cfg.grid;
    {
        const auto wide = cfg.guard_grid.empty() ? default_grid(-8.5, 8.5, 1200) : cfg.guard_grid;
        guard.insert(guard.end(), wide.begin(), wide.end());
    }
    FlowTrace trace;
    trace.final_map.blocks.emplace_back(1.0);
    trace.iterates.push_back(trace.final_map.blocks.back());

    // target samples for the learners, drawn once
    std::vector<double> target_samples;
    if (cfg.learner != FlowLearner::oracle) {
        if (!cfg.target.sampler) throw std::invalid_argument("flow_run: target sampler required");
        Rng rng(child_seed(cfg.rng_seed, 1001));
        target_samples.resize(cfg.sample_count);
        for (auto& x : target_samples) x = cfg.target.sampler(rng);
    }
    std::optional<StudentNet> target_score;
    if (cfg.learner == FlowLearner::score)
        target_score = score_fit(target_samples, cfg.learner_cfg, child_seed(cfg.rng_seed, 2001));

    try {
        for (int k = 0; k < cfg.steps; ++k) {
            PotentialStack& cur = trace.final_map.blocks.back();
            MapChain prev_chain{std::vector<PotentialStack>(trace.final_map.blocks.begin(),
                                                            trace.final_map.blocks.end() - 1)};

            FlowRecord rec;
            rec.k = k;
            rec.kl = diag.kl(trace.final_map);
            rec.bg = (cfg.compute_bg && trace.final_map.blocks.size() == 1)
                         ? diag.bg(cur)
                         : std::numeric_limits<double>::quiet_NaN();
            rec.min_hess = cur.convexity_margin(cfg.grid);
            rec.sup_map_err = diag.sup_map_err(trace.final_map);
            rec.mmd = std::numeric_limits<double>::quiet_NaN();
            if (cfg.compute_mmd) {
                Rng mrng(child_seed(cfg.rng_seed, 6000 + k));
                std::vector<double> pushed(cfg.mmd_samples), targ(cfg.mmd_samples);
                for (auto& x : pushed) {
                    double y = cfg.reference.sampler(mrng);
                    x = trace.final_map.map(y);
                }
                for (auto& x : targ) x = cfg.target.sampler(mrng);
                rec.mmd = mmd_sq(pushed, targ, median_heuristic_bandwidth(pushed, targ));
            }

            // build the update direction
            ResidualPtr residual;
            switch (cfg.learner) {
                case FlowLearner::oracle:
                    residual = make_oracle_delta(cur, cfg.target, cfg.reference);
                    break;
                case FlowLearner::logistic: {
                    Rng rng(child_seed(cfg.rng_seed, 3000 + k));
                    std::vector<double> model(target_samples.size());
                    for (auto& x : model) {
                        double y = cfg.reference.sampler(rng);
                        for (const auto& b : prev_chain.blocks) y = b.jet_eval(y).d1;
                        x = cur.jet_eval(y).d1;
                    }
                    StudentNet h = logistic_fit(target_samples, model, cfg.learner_cfg,
                                                child_seed(cfg.rng_seed, 4000 + k));
                    residual = make_classifier_residual(std::move(h), cur);
                    break;
                }
                case FlowLearner::score: {
                    Rng rng(child_seed(cfg.rng_seed, 3000 + k));
                    std::vector<double> model(target_samples.size());
                    for (auto& x : model) x = cur.jet_eval(cfg.reference.sampler(rng)).d1;
                    StudentNet sm = score_fit(model, cfg.learner_cfg,
                                              child_seed(cfg.rng_seed, 4000 + k));
                    residual = make_score_residual(std::move(sm), *target_score, cur, cfg.work_lo,
                                                   cfg.work_hi, cfg.freeze_nodes - 1);
                    break;
                }
            }

            rec.eta = resolve_eta(cfg.schedule, k, cur, *residual, guard);

            // choose the layer representation actually pushed
            ResidualPtr layer = residual;
            if (cfg.distill) {
                StudentNet stud = distill(*residual, cfg.student, cfg.distill_samples,
                                          cfg.distill_lo, cfg.distill_hi,
                                          child_seed(cfg.rng_seed, 5000 + k));
                layer = make_student_residual(std::move(stud));
            } else if (cfg.learner == FlowLearner::oracle) {
                // project the analytic direction onto a spline space whose knot
                // spacing tracks the explicit-step stability limit ~ sqrt(eta)
                int intervals = cfg.freeze_max_intervals;
                if (cfg.freeze_stability_scale > 0.0) {
                    const double spacing = cfg.freeze_stability_scale * std::sqrt(rec.eta);
                    intervals = std::clamp(
                        static_cast<int>(std::ceil((cfg.work_hi - cfg.work_lo) / spacing)),
                        cfg.freeze_min_intervals, cfg.freeze_max_intervals);
                }
                const Residual& r = *residual;
                layer = freeze_to_spline([&r](double y) { return r.eval(y).v; }, cfg.work_lo,
                                         cfg.work_hi, cfg.freeze_nodes, intervals);
                // a guarded step must respect the curvature of the layer that
                // is actually pushed
                if (const auto* ad = std::get_if<AdaptiveEta>(&cfg.schedule)) {
                    rec.eta = std::min(rec.eta, adaptive_step(cur, *layer, guard, ad->floor_eta,
                                                              ad->safety, ad->mode));
                }
                // pin the free constant: the reference-mean of the pushed layer
                // must equal the analytic direction's, which keeps the per-step
                // mean-potential identity exact at any projection resolution
                double defect = 0.0, mass = 0.0;
                for (size_t i = 0; i < diag.diag_rule.x.size(); ++i) {
                    const double w =
                        diag.diag_rule.w[i] * std::exp(-cfg.reference.f(diag.diag_rule.x[i]));
                    const double y = diag.diag_rule.x[i];
                    defect += w * (residual->eval(y).v - layer->eval(y).v);
                    mass += w;
                }
                layer = std::make_shared<ShiftedResidual>(std::move(layer), defect / mass);
            }

            PotentialStack next = cur.push(layer, rec.eta);
            rec.avg_identity_residual =
                std::fabs(diag.mean_potential_gap(prev_chain, cur, next) + rec.eta * rec.kl);

            const double margin = next.convexity_margin(guard);
            if (margin <= 0.0) {
                const bool guarded =
                    std::holds_alternative<AdaptiveEta>(cfg.schedule) &&
                    std::get<AdaptiveEta>(cfg.schedule).mode == AdaptiveMode::min_rule;
                trace.records.push_back(rec);
                if (guarded)
                    throw NumericError("flow_run: convexity lost under the guarded step rule");
                throw ConvexityError(cfg.grid[0]);
            }

            trace.final_map.blocks.back() = next;
            trace.iterates.push_back(next);
            trace.records.push_back(rec);

            // block refresh: model becomes the reference, potential restarts
            if (cfg.block_size > 0 && (k + 1) % cfg.block_size == 0 && k + 1 < cfg.steps) {
                trace.final_map.blocks.emplace_back(1.0);
                trace.iterates.clear();
                trace.iterates.push_back(trace.final_map.blocks.back());
            }
        }
    } catch (const NumericError& e) {
        trace.error = e.what();
    } catch (const TrainingError& e) {
        trace.error = e.what();
    } catch (const StackEvalError& e) {
        trace.error = e.what();
    }

    trace.final_map_err = diag.sup_map_err(trace.final_map);
    trace.final_min_hess = trace.final_map.blocks.back().convexity_margin(cfg.grid);
    try {
        trace.final_kl = diag.kl(trace.final_map);
    } catch (const NumericError&) {
        trace.final_kl = std::numeric_limits<double>::quiet_NaN();
    }
    return trace;
}

FlowTrace block_refresh_run(FlowConfig cfg, int block_size) {
    if (block_size < 1) throw std::invalid_argument("block_refresh_run: block size must be >= 1");
    cfg.block_size = block_size;
    cfg.learner = FlowLearner::logistic;
    return flow_run(cfg);
}

RegretReport regret_report(const FlowTrace& trace, double comparator_kl) {
    RegretReport rep;
    rep.per_step.reserve(trace.records.size());
    for (const auto& rec : trace.records) {
        rep.per_step.push_back(rec.kl - comparator_kl);
        rep.regret_sum += rec.kl - comparator_kl;
    }
    return rep;
}

std::pair<PotentialStack, double> oracle_step(const PotentialStack& psi, const Target1D& target,
                                              const Target1D& reference,
                                              const StepSchedule& schedule,
                                              std::span<const double> grid, int k) {
    ResidualPtr delta = make_oracle_delta(psi, target, reference);
    double eta = resolve_eta(schedule, k, psi, *delta, grid);
    // project at the stability resolution, mirroring flow_run's oracle path
    const int intervals =
        std::clamp(static_cast<int>(std::ceil(18.0 / (2.2 * std::sqrt(eta)))), 12, 600);
    const Residual& r = *delta;
    ResidualPtr layer =
        freeze_to_spline([&r](double y) { return r.eval(y).v; }, -9.0, 9.0, 3601, intervals);
    if (const auto* ad = std::get_if<AdaptiveEta>(&schedule))
        eta = std::min(eta, adaptive_step(psi, *layer, grid, ad->floor_eta, ad->safety, ad->mode));
    return {psi.push(std::move(layer), eta), eta};
}

void write_trace_csv(const FlowTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
    out << "k,eta,kl,bg,min_hess,sup_map_err,mmd,avg_identity_residual\n";
    char buf[512];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k,
                      r.eta, r.kl, r.bg, r.min_hess, r.sup_map_err, r.mmd,
                      r.avg_identity_residual);
        out << buf;
    }
}

}  // namespace pma
