#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mvsde/config.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/fhn.hpp"
#include "mvsde/initial_law.hpp"
#include "mvsde/models.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/time_step.hpp"

namespace mvsde {

// A ready-to-run system: the dynamics, the adaptive step rule that matches
// its drift growth, and the initial distribution. delta/horizon on the step
// function are left at their defaults for the caller to fill in.
struct ExampleBundle {
    std::shared_ptr<McKeanVlasovModel> model;
    TimeStepFunction step;
    InitialLaw initial;
};

namespace detail {

inline double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double c : x) s += c * c;
    return s;
}

// h(x) = min(1, |x|^-p) written so that x = 0 maps to 1 (the cap) rather
// than a division by zero.
inline double inverse_power_step(std::span<const double> x, int p) {
    const double r2 = squared_norm(x);
    if (r2 <= 1.0) return 1.0;
    double denom = r2;               // p == 2
    if (p == 4) denom = r2 * r2;
    return 1.0 / denom;
}

}  // namespace detail

// Build one of the five reference systems.
//   ex1  unit-ball confined drift with additive noise
//   ex2  Ginzburg-Landau with mean coupling        (params: sigma, c, x0)
//   ex3  Kuramoto oscillators with cubic drift     (params: sigma)
//   ex4  FitzHugh-Nagumo network                   (params: section "fhn")
//   ex5  quintic drift with geometric noise
// The seed pair feeds the per-particle streams for any randomness owned by
// the model itself (the Kuramoto intrinsic rates), keeping nested particle
// ladders consistent: particle i keeps its rate at every ladder level.
inline ExampleBundle make_example(const std::string& name, const ParamTable& params, int count,
                                  std::uint64_t master_seed, std::uint32_t experiment) {
    if (count < 1) throw DomainError("particle count must be >= 1");
    ExampleBundle out;

    if (name == "ex1") {
        out.model = std::make_shared<BallConfinedMeanField>();
        out.step.h = [](std::span<const double> x) { return 1.0 - detail::squared_norm(x); };
        out.initial = InitialLaw::point({0.0});
        return out;
    }

    if (name == "ex2") {
        const double sigma = params.get_real("sigma", 1.5);
        const double c = params.get_real("c", 0.5);
        out.model = std::make_shared<GinzburgLandauMeanField>(sigma, c);
        out.step.h = [](std::span<const double> x) { return detail::inverse_power_step(x, 2); };
        out.step.lower_law = LowerBoundLaw{1.0, 1.0, 2.0};
        out.initial = InitialLaw::point({params.get_real("x0", 1.0)});
        return out;
    }

    if (name == "ex3") {
        const double sigma = params.get_real("sigma", 1.0);
        std::vector<double> eta(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            SeedSpec s;
            s.master_seed = master_seed;
            s.experiment = experiment;
            s.particle = static_cast<std::uint32_t>(i);
            s.channel = kModelIntrinsicChannel;
            CounterRng rng(s);
            eta[static_cast<std::size_t>(i)] = rng.normal();
        }
        out.model = std::make_shared<KuramotoCubic>(sigma, std::move(eta));
        out.step.h = [](std::span<const double> x) { return detail::inverse_power_step(x, 2); };
        out.step.lower_law = LowerBoundLaw{1.0, 1.0, 2.0};
        out.initial = InitialLaw::uniform({0.5}, {1.0});
        return out;
    }

    if (name == "ex4") {
        const ParamTable fhn = params.section("fhn");
        FhnParams fp = FhnParams::from_config(fhn);

        static const char* const kInitKeys[] = {"v0_mean", "v0_sd", "w0_mean",
                                                "w0_sd",   "y0_mean", "y0_sd"};
        std::string missing;
        for (const char* key : kInitKeys) {
            if (!fhn.has(key)) {
                if (!missing.empty()) missing += ", ";
                missing += key;
            }
        }
        if (!missing.empty())
            throw ConfigError("missing required model parameters: " + missing);

        const int pcount = fp.population_count();
        std::vector<int> membership(static_cast<std::size_t>(count));
        // Contiguous blocks, sizes as even as possible.
        const int base = count / pcount;
        const int extra = count % pcount;
        int next = 0;
        for (int g = 0; g < pcount; ++g) {
            const int size = base + (g < extra ? 1 : 0);
            for (int r = 0; r < size; ++r) membership[static_cast<std::size_t>(next++)] = g;
        }

        const double step_gamma = fp.step_gamma;
        const FhnParams step_params = fp;
        const std::vector<double> zero_means(static_cast<std::size_t>(pcount), 0.0);
        out.step.h = [step_params, step_gamma, zero_means](std::span<const double> x) {
            const double r2 = detail::squared_norm(x);
            double f[3];
            // With zero gating means the synaptic term vanishes and the
            // drift reduces to the neuron's own dynamics, which is what the
            // step rule is scaled against.
            fhn_drift(0.0, x, zero_means, step_params, 0, std::span<double>(f, 3));
            const double f2 = f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
            if (f2 == 0.0) return std::numeric_limits<double>::max();
            return step_gamma * r2 / f2;
        };

        const double inf = std::numeric_limits<double>::infinity();
        out.initial = InitialLaw::normal(
            {fhn.require_real("v0_mean"), fhn.require_real("w0_mean"), fhn.require_real("y0_mean")},
            {fhn.require_real("v0_sd"), fhn.require_real("w0_sd"), fhn.require_real("y0_sd")});
        out.initial.clamp_lo = {-inf, -inf, 0.0};
        out.initial.clamp_hi = {inf, inf, 1.0};

        out.model = std::make_shared<FitzHughNagumoNetwork>(std::move(fp), std::move(membership));
        return out;
    }

    if (name == "ex5") {
        out.model = std::make_shared<QuinticInteractingGBM>();
        out.step.h = [](std::span<const double> x) { return detail::inverse_power_step(x, 4); };
        out.step.lower_law = LowerBoundLaw{1.0, 1.0, 4.0};
        out.initial = InitialLaw::point({1.0});
        return out;
    }

    throw ConfigError("unknown example '" + name + "' (expected ex1..ex5)");
}

}  // namespace mvsde
