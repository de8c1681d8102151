#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>

#include "mvsde/errors.hpp"

namespace mvsde {

// Coefficients (a, b, c) of an inverse-polynomial floor 1/(a|x|^c + b) that a
// step function is expected to stay above; carried for the advisory probe.
struct LowerBoundLaw {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

// Adaptive step rule h paired with the mesh parameter delta and horizon T.
// The deployed per-step size is the lower envelope of the admissible band:
//   h_delta(x) = delta * min(T, max(h(x), floor)).
// The floor (default 1e-12) guards rules that can reach zero on admissible
// states (1 - |x|^2 on the unit sphere, |x|^2/|f(x)|^2 at the origin). With
// the floored rule h~ = max(h, floor) the envelope satisfies
//   delta * min(T, h~) <= h_delta <= min(delta * T, h~)
// identically; where the raw rule dips below the floor, the deployed step is
// lifted to delta * floor instead of collapsing to zero.
struct TimeStepFunction {
    std::function<double(std::span<const double>)> h;
    double delta = 1.0;          // in (0, 1]
    double horizon = 1.0;        // T
    double floor = 1e-12;
    std::optional<LowerBoundLaw> lower_law;

    TimeStepFunction with_delta(double new_delta) const {
        TimeStepFunction f = *this;
        f.delta = new_delta;
        return f;
    }
};

inline double h_delta(const TimeStepFunction& f, std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("h_delta: state has a non-finite entry");
    const double raw = std::max(f.h(x), f.floor);
    return f.delta * std::min(f.horizon, raw);
}

// Largest step from t_now that does not cross block_end.
inline double clamp_step(double proposed, double t_now, double block_end) {
    if (t_now >= block_end) throw LogicError("clamp_step: t_now is at or past block_end");
    return std::min(proposed, block_end - t_now);
}

}  // namespace mvsde
