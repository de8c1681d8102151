#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mvsde/errors.hpp"

namespace mvsde {

enum class SchemeKind {
    uniform_euler,
    tamed_euler,
    scheme1_adaptive_euler,   // shared min step, fresh measure snapshot per step
    scheme2_adaptive_euler,   // per-particle steps, measure frozen per block
    tamed_milstein,
    adaptive_milstein,
};

inline const char* scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::uniform_euler: return "uniform_euler";
        case SchemeKind::tamed_euler: return "tamed_euler";
        case SchemeKind::scheme1_adaptive_euler: return "scheme1_adaptive_euler";
        case SchemeKind::scheme2_adaptive_euler: return "scheme2_adaptive_euler";
        case SchemeKind::tamed_milstein: return "tamed_milstein";
        case SchemeKind::adaptive_milstein: return "adaptive_milstein";
    }
    return "?";
}

inline SchemeKind parse_scheme_kind(const std::string& name) {
    if (name == "uniform_euler") return SchemeKind::uniform_euler;
    if (name == "tamed_euler") return SchemeKind::tamed_euler;
    if (name == "scheme1_adaptive_euler") return SchemeKind::scheme1_adaptive_euler;
    if (name == "scheme2_adaptive_euler") return SchemeKind::scheme2_adaptive_euler;
    if (name == "tamed_milstein") return SchemeKind::tamed_milstein;
    if (name == "adaptive_milstein") return SchemeKind::adaptive_milstein;
    throw ConfigError("unknown scheme '" + name +
                      "' (expected uniform_euler, tamed_euler, scheme1_adaptive_euler, "
                      "scheme2_adaptive_euler, tamed_milstein, or adaptive_milstein)");
}

// Parameters of one scheme run. Each kind uses exactly the fields relevant to
// it: uniform/tamed kinds read `steps` (and `alpha` for tamed Euler), the
// adaptive kinds read `delta`; Scheme 2 derives its block count M = 1/delta.
struct SchemeConfig {
    SchemeKind kind = SchemeKind::uniform_euler;
    double horizon = 1.0;   // T
    int steps = 0;          // M, uniform mesh size
    double delta = 0.0;     // adaptive mesh parameter in (0, 1]
    double alpha = 0.5;     // taming exponent, 1/2 or 1

    bool is_adaptive() const {
        return kind == SchemeKind::scheme1_adaptive_euler ||
               kind == SchemeKind::scheme2_adaptive_euler ||
               kind == SchemeKind::adaptive_milstein;
    }
    bool is_milstein() const {
        return kind == SchemeKind::tamed_milstein || kind == SchemeKind::adaptive_milstein;
    }

    int block_count() const {  // Scheme 2 only
        const double m = 1.0 / delta;
        const double rounded = std::round(m);
        if (std::abs(m - rounded) > 1e-9 || rounded < 1.0)
            throw ConfigError("SchemeConfig: 1/delta must be a whole number of blocks");
        return static_cast<int>(rounded);
    }

    void validate() const {
        if (!(horizon > 0.0)) throw ConfigError("SchemeConfig: horizon must be positive");
        if (is_adaptive()) {
            if (!(delta > 0.0 && delta <= 1.0))
                throw ConfigError("SchemeConfig: delta must lie in (0, 1]");
            if (kind == SchemeKind::scheme2_adaptive_euler) (void)block_count();
        } else {
            if (steps < 1) throw ConfigError("SchemeConfig: steps must be >= 1");
        }
        if (kind == SchemeKind::tamed_euler && alpha != 0.5 && alpha != 1.0)
            throw ConfigError("SchemeConfig: alpha must be 1/2 or 1");
    }
};

enum class DivergencePolicy {
    halt,    // throw DivergedError at the first corrupted particle
    record,  // freeze corrupted particles, keep going, report them
};

struct RunOptions {
    int workers = 1;
    bool record_trajectory = false;  // keep per-step knots + coefficient snapshots
    DivergencePolicy divergence = DivergencePolicy::halt;
    std::int64_t max_steps_per_particle = 50'000'000;
};

}  // namespace mvsde
