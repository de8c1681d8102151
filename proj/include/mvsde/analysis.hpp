#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/brownian.hpp"
#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/initial_law.hpp"
#include "mvsde/model.hpp"
#include "mvsde/scheme_config.hpp"
#include "mvsde/schemes.hpp"
#include "mvsde/time_step.hpp"

namespace mvsde {

// A refinement ladder for one scheme: level l means step control 2^-l for
// adaptive schemes and ceil(2^l T) uniform steps otherwise. Every level is
// driven by the same Brownian paths (bridge refinement), which is what makes
// adjacent-level differences measure the discretisation error alone.
struct LevelLadder {
    SchemeKind kind = SchemeKind::scheme1_adaptive_euler;
    std::vector<int> levels;  // strictly increasing
    double horizon = 1.0;
    double alpha = 0.5;  // taming exponent where the scheme uses one
    std::uint64_t master_seed = 0;
    std::uint32_t experiment = 0;

    void validate() const {
        if (levels.size() < 2) throw ConfigError("refinement ladder needs at least 2 levels");
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (levels[i] <= levels[i - 1])
                throw ConfigError("refinement ladder levels must be strictly increasing");
        if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    }
};

// Scheme configuration for one ladder level.
inline SchemeConfig ladder_config(SchemeKind kind, int level, double horizon, double alpha) {
    SchemeConfig cfg;
    cfg.kind = kind;
    cfg.horizon = horizon;
    cfg.alpha = alpha;
    if (cfg.is_adaptive()) {
        cfg.delta = std::ldexp(1.0, -level);
    } else {
        cfg.steps = static_cast<int>(std::ceil(std::ldexp(1.0, level) * horizon));
    }
    cfg.validate();
    return cfg;
}

struct ConvergencePoint {
    int level = 0;           // the finer level of the pair
    double delta_or_m = 0.0; // step control of that level
    double avg_step = 0.0;   // T · N / Σ_i N_T^i at that level
    double rmse = 0.0;       // distance to the next-coarser level
};

namespace detail {

inline double cloud_rmse(const ParticleCloud& a, const ParticleCloud& b, int component) {
    double sum = 0.0;
    for (int i = 0; i < a.count; ++i) {
        const auto xa = a.state(i);
        const auto xb = b.state(i);
        if (component >= 0) {
            const double diff = xa[static_cast<std::size_t>(component)] -
                                xb[static_cast<std::size_t>(component)];
            sum += diff * diff;
        } else {
            for (int m = 0; m < a.dim; ++m) {
                const double diff = xa[static_cast<std::size_t>(m)] - xb[static_cast<std::size_t>(m)];
                sum += diff * diff;
            }
        }
    }
    return std::sqrt(sum / static_cast<double>(a.count));
}

inline double harmonic_mean_step(const Trajectory& traj) {
    std::int64_t total = 0;
    for (std::int64_t n : traj.final_cloud.step_counts) total += n;
    return traj.horizon * static_cast<double>(traj.final_cloud.count) /
           static_cast<double>(total);
}

}  // namespace detail

// Strong error across a refinement ladder: all levels run on the same
// Brownian paths and the same initial draws, and each adjacent pair (l-1, l)
// contributes one point with the distance between their final clouds and the
// finer level's realised average step. component < 0 compares full state
// vectors; component >= 0 compares that coordinate only.
inline std::vector<ConvergencePoint> strong_rmse(const McKeanVlasovModel& model,
                                                 const TimeStepFunction& step,
                                                 const InitialLaw& initial,
                                                 const LevelLadder& ladder, int count,
                                                 const RunOptions& opts = {},
                                                 int component = -1) {
    ladder.validate();
    if (component >= model.dim_state())
        throw DimensionError("rmse component out of range");

    std::vector<BrownianPath> paths =
        make_paths(ladder.master_seed, ladder.experiment, count, model.dim_noise());
    const ParticleCloud cloud0 =
        draw_initial_cloud(initial, count, ladder.master_seed, ladder.experiment);

    std::vector<ConvergencePoint> out;
    ParticleCloud previous;  // empty until the first level lands
    for (std::size_t li = 0; li < ladder.levels.size(); ++li) {
        const int level = ladder.levels[li];
        const SchemeConfig cfg = ladder_config(ladder.kind, level, ladder.horizon, ladder.alpha);
        TimeStepFunction fl = step;
        fl.delta = cfg.delta;
        fl.horizon = cfg.horizon;
        Trajectory traj = run_scheme(model, cloud0, paths, &fl, cfg, opts);

        if (li > 0) {
            ConvergencePoint p;
            p.level = level;
            p.delta_or_m = cfg.is_adaptive() ? cfg.delta : static_cast<double>(cfg.steps);
            p.avg_step = detail::harmonic_mean_step(traj);
            p.rmse = detail::cloud_rmse(traj.final_cloud, previous, component);
            out.push_back(p);
        }
        previous = std::move(traj.final_cloud);
    }
    return out;
}

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
    int excluded = 0;  // points dropped for non-positive values
};

// Least-squares slope of log(y) against log(x). Non-positive entries (e.g. a
// zero rmse from two coupled identical runs) are excluded and counted.
inline FitResult fit_order(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3)
        throw DomainError("order fit needs at least 3 points");
    std::vector<double> xs, ys;
    FitResult res;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
            ++res.excluded;
            continue;
        }
        xs.push_back(std::log(x));
        ys.push_back(std::log(y));
    }
    const std::size_t n = xs.size();
    if (n < 2) throw DomainError("order fit has fewer than 2 usable points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DomainError("order fit needs distinct x values");
    res.slope = sxy / sxx;
    res.intercept = my - res.slope * mx;
    const double ss_res = syy - res.slope * sxy;
    res.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return res;
}

// Builds the model for a contiguous particle-index block [first, first+count).
// Stateless models ignore the arguments; models owning per-particle data (the
// Kuramoto intrinsic rates) must key them by global particle index so that
// sub-systems reuse the enclosing system's values.
using ModelFactory =
    std::function<std::shared_ptr<McKeanVlasovModel>(int first_particle, int count)>;

struct PocPoint {
    int n_particles = 0;
    double error = 0.0;
};

// Weak particle-count error: for each adjacent pair of a doubling ladder
// N_{l+1} = 2 N_l, the difference of final-time ensemble means (first state
// component), averaged over `repetitions` independent replicas, each replica
// coupling its levels by giving particle i the same streams at every level
// (the smaller system's Brownian set is a subset of the larger one's).
inline std::vector<PocPoint> poc_weak(const ModelFactory& make_model,
                                      const TimeStepFunction& step, const InitialLaw& initial,
                                      const SchemeConfig& cfg, const std::vector<int>& ladder,
                                      int repetitions, std::uint64_t master_seed,
                                      std::uint32_t experiment_base,
                                      const RunOptions& opts = {}) {
    if (ladder.size() < 2) throw ConfigError("particle ladder needs at least 2 sizes");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] != 2 * ladder[i - 1])
            throw ConfigError("particle ladder must double at each level");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    cfg.validate();

    std::vector<double> signed_sums(ladder.size() - 1, 0.0);
    for (int rep = 0; rep < repetitions; ++rep) {
        const std::uint32_t experiment = experiment_base + static_cast<std::uint32_t>(rep);
        std::vector<double> level_means;
        level_means.reserve(ladder.size());
        for (int n : ladder) {
            const auto model = make_model(0, n);
            TimeStepFunction fl = step;
            fl.delta = cfg.delta;
            fl.horizon = cfg.horizon;
            std::vector<BrownianPath> paths =
                make_paths(master_seed, experiment, n, model->dim_noise());
            const ParticleCloud cloud0 = draw_initial_cloud(initial, n, master_seed, experiment);
            const Trajectory traj = run_scheme(*model, cloud0, paths, &fl, cfg, opts);
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += traj.final_cloud.state(i)[0];
            level_means.push_back(mean / static_cast<double>(n));
        }
        for (std::size_t l = 0; l + 1 < ladder.size(); ++l)
            signed_sums[l] += level_means[l] - level_means[l + 1];
    }

    std::vector<PocPoint> out;
    for (std::size_t l = 0; l + 1 < ladder.size(); ++l) {
        PocPoint p;
        p.n_particles = ladder[l];
        p.error = std::abs(signed_sums[l] / static_cast<double>(repetitions));
        out.push_back(p);
    }
    return out;
}

// Strong particle-count error at one system size: the full N-particle system
// against two independent N/2 half-systems driven by the first/second halves
// of the same Brownian set and initial draws.
inline double poc_strong(const ModelFactory& make_model, const TimeStepFunction& step,
                         const InitialLaw& initial, const SchemeConfig& cfg, int count,
                         std::uint64_t master_seed, std::uint32_t experiment,
                         const RunOptions& opts = {}) {
    if (count < 2 || count % 2 != 0) throw DomainError("system size must be even and >= 2");
    cfg.validate();
    TimeStepFunction fl = step;
    fl.delta = cfg.delta;
    fl.horizon = cfg.horizon;

    const auto run_block = [&](int first, int n) {
        const auto model = make_model(first, n);
        std::vector<BrownianPath> paths =
            make_paths(master_seed, experiment, n, model->dim_noise(), 1e-12, first);
        const ParticleCloud cloud0 =
            draw_initial_cloud(initial, n, master_seed, experiment, first);
        return run_scheme(*model, cloud0, paths, &fl, cfg, opts).final_cloud;
    };

    const ParticleCloud full = run_block(0, count);
    const ParticleCloud half_a = run_block(0, count / 2);
    const ParticleCloud half_b = run_block(count / 2, count / 2);

    const int d = full.dim;
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        const auto xf = full.state(i);
        const auto xh = i < count / 2 ? half_a.state(i) : half_b.state(i - count / 2);
        for (int m = 0; m < d; ++m) {
            const double diff = xf[static_cast<std::size_t>(m)] - xh[static_cast<std::size_t>(m)];
            sum += diff * diff;
        }
    }
    return std::sqrt(sum / static_cast<double>(count));
}

struct StepHistogram {
    int bin_width = 1;
    std::int64_t first_bin_start = 0;       // inclusive lower edge of counts[0]
    std::vector<std::int64_t> counts;       // particles per [start, start+width) bin
    double mean = 0.0;
    std::int64_t max_steps = 0;
};

// Distribution of per-particle step counts at the end of a run.
inline StepHistogram step_histogram(const Trajectory& traj, int bin_width) {
    if (bin_width < 1) throw DomainError("bin width must be >= 1");
    const auto& counts = traj.final_cloud.step_counts;
    if (counts.empty()) throw DomainError("trajectory has no particles");

    std::int64_t lo = counts[0], hi = counts[0];
    double mean = 0.0;
    for (std::int64_t c : counts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        mean += static_cast<double>(c);
    }
    mean /= static_cast<double>(counts.size());

    StepHistogram h;
    h.bin_width = bin_width;
    h.first_bin_start = (lo / bin_width) * bin_width;
    if (lo < 0 && lo % bin_width != 0) h.first_bin_start -= bin_width;
    const std::size_t bins =
        static_cast<std::size_t>((hi - h.first_bin_start) / bin_width) + 1;
    h.counts.assign(bins, 0);
    for (std::int64_t c : counts)
        ++h.counts[static_cast<std::size_t>((c - h.first_bin_start) / bin_width)];
    h.mean = mean;
    h.max_steps = hi;
    return h;
}

}  // namespace mvsde
