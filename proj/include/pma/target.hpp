// Target/reference distributions: normalized negative log-density f with
// analytic derivatives to order 3, the associated Density1D, and a seeded
// sampler where available.
#pragma once

#include <functional>
#include <optional>

#include "pma/density.hpp"
#include "pma/jet.hpp"
#include "pma/rng.hpp"

namespace pma {

struct Target1D {
    std::function<double(double)> f;    // -log density, normalized
    std::function<double(double)> f1;
    std::function<double(double)> f2;
    std::function<double(double)> f3;
    std::function<double(Rng&)> sampler;
    Density1D density;

    // jet of f at the point u.v, composed with the jet u
    Jet3 f_jet(const Jet3& u) const { return jet_compose(f(u.v), f1(u.v), f2(u.v), f3(u.v), u); }
};

Target1D gaussian_target(double mean, double sd);
inline Target1D standard_normal_target() { return gaussian_target(0.0, 1.0); }

// Unit-variance two-component normal location mixture w·N(a,1) + (1-w)·N(b,1).
Target1D mixture_target(double a, double b, double w);

}  // namespace pma
