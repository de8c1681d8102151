#pragma once

#include <span>
#include <vector>

#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"

namespace mvsde {

enum class InteractionKind { separable, pairwise };

// Sufficient statistics of one measure snapshot for separable interactions
// (means, mean sin/cos, per-population means, ...). Layout is model defined;
// recomputed whenever the scheme takes a new snapshot.
struct InteractionCache {
    std::vector<double> values;
};

// Coefficients of dX = b(t, X, mu) dt + sigma(t, X, mu) dW for the particle
// approximation. Evaluations take the particle index because some models
// attach per-particle data (Kuramoto frequencies, population labels); the
// index is part of which coefficient set applies, not part of the state.
//
// Two evaluation routes must agree: the direct one against the explicit atom
// list (O(N) per call) and, for separable models, the cached one through
// measure_statistics. Schemes use the cached route when available; the direct
// route doubles as its correctness oracle.
class McKeanVlasovModel {
public:
    virtual ~McKeanVlasovModel() = default;

    virtual int dim_state() const = 0;
    virtual int dim_noise() const = 0;
    virtual InteractionKind interaction_kind() const = 0;

    // Direct route.
    virtual void drift(double t, int particle, std::span<const double> x,
                       const EmpiricalMeasure& mu, std::span<double> out) const = 0;
    // out is row-major dim_state() x dim_noise().
    virtual void diffusion(double t, int particle, std::span<const double> x,
                           const EmpiricalMeasure& mu, std::span<double> out) const = 0;

    // Cached route; only separable models implement these three.
    virtual void measure_statistics(const EmpiricalMeasure&, InteractionCache&) const {
        throw UnsupportedError("measure_statistics: model has pairwise-only interaction");
    }
    virtual void drift_cached(double, int, std::span<const double>, const InteractionCache&,
                              std::span<double>) const {
        throw UnsupportedError("drift_cached: model has pairwise-only interaction");
    }
    virtual void diffusion_cached(double, int, std::span<const double>, const InteractionCache&,
                                  std::span<double>) const {
        throw UnsupportedError("diffusion_cached: model has pairwise-only interaction");
    }

    // Milstein correction operator: out[(j1 * k + j2) * d + m] holds
    // L^{j1} sigma_{m,j2}(x) with L^{j} = sum_m sigma_{m,j} d/dx_m.
    // Commutativity in (j1, j2) is what lets the schemes drop Levy areas.
    virtual bool has_milstein_correction() const { return false; }
    virtual void milstein_correction(std::span<const double>, std::span<double>) const {
        throw UnsupportedError("milstein_correction: not provided by this model");
    }

    // Applied to the state right after every accepted step (default identity);
    // Example 1 uses it to pull states back inside the open unit ball.
    virtual void post_step_hook(std::span<double>) const {}
};

}  // namespace mvsde
