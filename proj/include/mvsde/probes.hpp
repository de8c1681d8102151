#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mvsde/cloud.hpp"
#include "mvsde/model.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/time_step.hpp"

namespace mvsde {

// Sampling-based falsification of the standing assumptions on a step rule.
// A clean report is evidence, not a proof; a violation is a counterexample.
struct ProbeViolation {
    std::vector<double> x;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ProbeReport {
    std::string check;
    int samples = 0;
    long long violation_count = 0;
    std::vector<ProbeViolation> examples;  // at most 8 retained
    double fit_lc = 0.0;                   // monotone probe only
    double fit_ld = 0.0;
    bool fitted = false;
    bool passed() const { return violation_count == 0; }
};

namespace detail {

inline void record_violation(ProbeReport& report, std::span<const double> x, double lhs,
                             double rhs) {
    ++report.violation_count;
    if (report.examples.size() < 8)
        report.examples.push_back({{x.begin(), x.end()}, lhs, rhs});
}

// Magnitude radius * v^2 reaches the full radius while keeping most samples
// near the bulk; direction uniform on the sphere. First sample is the origin.
inline void probe_state(CounterRng& rng, int index, double radius, std::span<double> x) {
    if (index == 0) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }
    double norm2 = 0.0;
    for (auto& v : x) {
        v = rng.normal();
        norm2 += v * v;
    }
    const double u = rng.uniform01_halfopen();
    const double target = radius * u * u;
    const double scale = norm2 > 0.0 ? target / std::sqrt(norm2) : 0.0;
    for (auto& v : x) v *= scale;
}

// The step size the schemes actually deploy, before the delta factor.
inline double effective_h(const TimeStepFunction& f, std::span<const double> x) {
    return std::min(f.horizon, std::max(f.h(x), f.floor));
}

}  // namespace detail

// Checks the monotone-type growth condition <x, b> + kappa h(x) |b|^2 <=
// L_c |x|^2 + L_d with kappa = 1/2 (Euler) or 3/2 (Milstein). A line is
// least-squares fitted on the inner half of the sampled radius; outer samples
// escaping the fitted envelope plus a safety margin are reported.
inline ProbeReport probe_monotone_step_condition(const McKeanVlasovModel& model,
                                                 const TimeStepFunction& f, double kappa,
                                                 int samples = 10000, double radius = 1000.0,
                                                 std::uint64_t master_seed = 0,
                                                 std::uint32_t experiment = 0) {
    ProbeReport report;
    report.check = "monotone_step_condition";
    report.samples = samples;
    const int d = model.dim_state();
    SeedSpec spec;
    spec.master_seed = master_seed;
    spec.experiment = experiment;
    spec.channel = kProbeChannel;
    CounterRng rng(spec);

    constexpr int n_atoms = 8;
    std::vector<double> atoms(static_cast<std::size_t>(n_atoms) * static_cast<std::size_t>(d));
    std::vector<double> x(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    std::vector<double> us, gs;
    std::vector<std::vector<double>> xs;
    us.reserve(static_cast<std::size_t>(samples));
    gs.reserve(static_cast<std::size_t>(samples));
    xs.reserve(static_cast<std::size_t>(samples));

    for (int s = 0; s < samples; ++s) {
        const double t = f.horizon * rng.uniform01_halfopen();
        for (auto& v : atoms) v = rng.normal();
        EmpiricalMeasure mu(atoms.data(), n_atoms, d);
        detail::probe_state(rng, s, radius, x);
        model.drift(t, 0, x, mu, b);
        double u = 0.0, xb = 0.0, b2 = 0.0;
        for (int m = 0; m < d; ++m) {
            u += x[static_cast<std::size_t>(m)] * x[static_cast<std::size_t>(m)];
            xb += x[static_cast<std::size_t>(m)] * b[static_cast<std::size_t>(m)];
            b2 += b[static_cast<std::size_t>(m)] * b[static_cast<std::size_t>(m)];
        }
        us.push_back(u);
        gs.push_back(xb + kappa * detail::effective_h(f, x) * b2);
        xs.push_back(x);
    }

    // Least squares of g against (|x|^2, 1) on the inner half-radius.
    const double inner_u = (radius / 2.0) * (radius / 2.0);
    double su = 0, sg = 0, suu = 0, sug = 0;
    long long n_inner = 0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        if (us[i] > inner_u) continue;
        ++n_inner;
        su += us[i];
        sg += gs[i];
        suu += us[i] * us[i];
        sug += us[i] * gs[i];
    }
    const double denom = static_cast<double>(n_inner) * suu - su * su;
    const double lc = denom != 0.0 ? (static_cast<double>(n_inner) * sug - su * sg) / denom : 0.0;
    const double ld =
        n_inner > 0 ? (sg - lc * su) / static_cast<double>(n_inner) : 0.0;
    report.fit_lc = lc;
    report.fit_ld = ld;
    report.fitted = n_inner >= 2;

    double max_resid = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        if (us[i] > inner_u) continue;
        max_resid = std::max(max_resid, std::abs(gs[i] - (lc * us[i] + ld)));
        scale = std::max(scale, std::abs(gs[i]));
    }
    for (std::size_t i = 0; i < us.size(); ++i) {
        if (us[i] <= inner_u) continue;
        const double line = lc * us[i] + ld;
        const double bound = line + 2.0 * max_resid + 1e-9 * (scale + std::abs(line));
        if (gs[i] > bound) detail::record_violation(report, xs[i], gs[i], bound);
    }
    return report;
}

// Checks the diffusion-compatible ceiling h(x) <= C (1 + |x|^(3q))^(-1).
inline ProbeReport probe_superlinear_diffusion_bound(const TimeStepFunction& f, int dim, double q,
                                                     double C, int samples = 10000,
                                                     double radius = 1000.0,
                                                     std::uint64_t master_seed = 0,
                                                     std::uint32_t experiment = 0) {
    ProbeReport report;
    report.check = "superlinear_diffusion_bound";
    report.samples = samples;
    SeedSpec spec;
    spec.master_seed = master_seed;
    spec.experiment = experiment;
    spec.channel = kProbeChannel;
    CounterRng rng(spec);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int s = 0; s < samples; ++s) {
        detail::probe_state(rng, s, radius, x);
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        const double lhs = detail::effective_h(f, x);
        const double rhs = C / (1.0 + std::pow(norm, 3.0 * q));
        if (lhs > rhs * (1.0 + 1e-9)) detail::record_violation(report, x, lhs, rhs);
    }
    return report;
}

// Checks the inverse-polynomial floor h(x) >= (a |x|^c + b)^(-1) declared in
// the step rule's lower_law.
inline ProbeReport probe_lower_bound_law(const TimeStepFunction& f, int dim, int samples = 10000,
                                         double radius = 1000.0, std::uint64_t master_seed = 0,
                                         std::uint32_t experiment = 0) {
    if (!f.lower_law)
        throw ConfigError("probe_lower_bound_law: step function declares no lower_law");
    ProbeReport report;
    report.check = "lower_bound_law";
    report.samples = samples;
    const LowerBoundLaw law = *f.lower_law;
    SeedSpec spec;
    spec.master_seed = master_seed;
    spec.experiment = experiment;
    spec.channel = kProbeChannel;
    CounterRng rng(spec);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int s = 0; s < samples; ++s) {
        detail::probe_state(rng, s, radius, x);
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        const double lhs = detail::effective_h(f, x);
        const double rhs = 1.0 / (law.a * std::pow(norm, law.c) + law.b);
        if (lhs < rhs * (1.0 - 1e-9)) detail::record_violation(report, x, lhs, rhs);
    }
    return report;
}

}  // namespace mvsde
