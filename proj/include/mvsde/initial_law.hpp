#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

// Product initial law with one 1-d factor per coordinate:
//   point_mass: X = a          uniform: X ~ U[a, b)         normal: X ~ N(a, b^2)
// Optional clamp bounds keep draws inside a model's admissible region (the
// FitzHugh-Nagumo gating variable must start in [0, 1]).
struct InitialLaw {
    enum class Kind { point_mass, uniform, normal };

    Kind kind = Kind::point_mass;
    std::vector<double> a;  // point value / lower bound / mean, one per coordinate
    std::vector<double> b;  // unused     / upper bound / standard deviation
    std::vector<double> clamp_lo;  // empty = no clamping
    std::vector<double> clamp_hi;

    static InitialLaw point(std::vector<double> value) {
        InitialLaw law;
        law.kind = Kind::point_mass;
        law.a = std::move(value);
        return law;
    }
    static InitialLaw uniform(std::vector<double> lo, std::vector<double> hi) {
        InitialLaw law;
        law.kind = Kind::uniform;
        law.a = std::move(lo);
        law.b = std::move(hi);
        return law;
    }
    static InitialLaw normal(std::vector<double> mean, std::vector<double> sd) {
        InitialLaw law;
        law.kind = Kind::normal;
        law.a = std::move(mean);
        law.b = std::move(sd);
        return law;
    }

    int dim() const { return static_cast<int>(a.size()); }

    void draw(CounterRng& rng, std::span<double> out) const {
        const std::size_t d = a.size();
        switch (kind) {
            case Kind::point_mass:
                for (std::size_t m = 0; m < d; ++m) out[m] = a[m];
                break;
            case Kind::uniform:
                for (std::size_t m = 0; m < d; ++m) {
                    if (a[m] > b[m]) throw DomainError("InitialLaw: uniform lower bound > upper");
                    out[m] = a[m] + (b[m] - a[m]) * rng.uniform01_halfopen();
                }
                break;
            case Kind::normal:
                for (std::size_t m = 0; m < d; ++m) out[m] = a[m] + b[m] * rng.normal();
                break;
        }
        if (!clamp_lo.empty())
            for (std::size_t m = 0; m < d; ++m)
                out[m] = std::clamp(out[m], clamp_lo[m], clamp_hi[m]);
    }
};

// N independent draws, one reserved RNG stream per particle so that the first
// N draws of a larger cloud coincide with a smaller cloud's draws (nested
// particle ladders rely on this). first_particle offsets the stream indices
// so a sub-system can reproduce a larger system's draws for its particles.
inline ParticleCloud draw_initial_cloud(const InitialLaw& law, int count,
                                        std::uint64_t master_seed, std::uint32_t experiment,
                                        int first_particle = 0) {
    ParticleCloud cloud(count, law.dim());
    for (int i = 0; i < count; ++i) {
        SeedSpec s;
        s.master_seed = master_seed;
        s.experiment = experiment;
        s.particle = static_cast<std::uint32_t>(first_particle + i);
        s.channel = kInitialLawChannel;
        CounterRng rng(s);
        law.draw(rng, cloud.state(i));
    }
    return cloud;
}

}  // namespace mvsde
