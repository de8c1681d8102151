#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mvsde/brownian.hpp"
#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/model.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/scheme_config.hpp"
#include "mvsde/time_step.hpp"
#include "mvsde/trajectory.hpp"

namespace mvsde {

inline constexpr double kCorruptionThreshold = 1e100;

namespace detail {

inline bool state_corrupted(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v) || std::abs(v) > kCorruptionThreshold) return true;
    return false;
}

// x_next = x + b h + sigma dW, written to out. Every scheme funnels through
// this one expression so that degenerate parameter choices reduce to each
// other bit-exactly.
inline void euler_update(std::span<const double> x, std::span<const double> b,
                         std::span<const double> sigma, double h, std::span<const double> dw,
                         std::span<double> out) {
    const int d = static_cast<int>(x.size());
    const int k = static_cast<int>(dw.size());
    for (int m = 0; m < d; ++m) {
        double v = x[static_cast<std::size_t>(m)] + b[static_cast<std::size_t>(m)] * h;
        const std::size_t row = static_cast<std::size_t>(m) * static_cast<std::size_t>(k);
        for (int j = 0; j < k; ++j)
            v += sigma[row + static_cast<std::size_t>(j)] * dw[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(m)] = v;
    }
}

// out_m += 1/2 sum_{j1,j2} L^{j1}sigma_{m,j2} (dW_j1 dW_j2 - delta_{j1 j2} h).
inline void add_milstein_correction(std::span<const double> lsig, int d, int k,
                                    std::span<const double> dw, double h, std::span<double> out) {
    for (int j1 = 0; j1 < k; ++j1)
        for (int j2 = 0; j2 < k; ++j2) {
            const double factor = dw[static_cast<std::size_t>(j1)] * dw[static_cast<std::size_t>(j2)] -
                                  (j1 == j2 ? h : 0.0);
            const std::size_t base = (static_cast<std::size_t>(j1) * static_cast<std::size_t>(k) +
                                      static_cast<std::size_t>(j2)) *
                                     static_cast<std::size_t>(d);
            for (int m = 0; m < d; ++m)
                out[static_cast<std::size_t>(m)] += 0.5 * lsig[base + static_cast<std::size_t>(m)] * factor;
        }
}

enum class TamingMode { none, euler_pow, milstein_h };

struct EngineScratch {
    std::vector<double> b, sigma, dw, xnew, lsig;
    explicit EngineScratch(int d, int k)
        : b(static_cast<std::size_t>(d)),
          sigma(static_cast<std::size_t>(d) * static_cast<std::size_t>(k)),
          dw(static_cast<std::size_t>(k)),
          xnew(static_cast<std::size_t>(d)),
          lsig(static_cast<std::size_t>(d) * static_cast<std::size_t>(k) *
               static_cast<std::size_t>(k)) {}
};

inline void scale_drift_tamed(std::span<double> b, double factor) {
    double norm = 0.0;
    for (double v : b) norm += v * v;
    norm = std::sqrt(norm);
    const double scale = 1.0 / (1.0 + factor * norm);
    for (auto& v : b) v *= scale;
}

struct Recorder {
    bool active = false;
    int d = 0, k = 0;
    std::vector<ParticleTrack>* tracks = nullptr;

    void knot(int i, double t, std::span<const double> x, std::span<const double> b,
              std::span<const double> sigma) const {
        if (!active) return;
        ParticleTrack& tr = (*tracks)[static_cast<std::size_t>(i)];
        tr.times.push_back(t);
        tr.states.insert(tr.states.end(), x.begin(), x.end());
        tr.drifts.insert(tr.drifts.end(), b.begin(), b.end());
        tr.diffusions.insert(tr.diffusions.end(), sigma.begin(), sigma.end());
    }
    void terminal(int i, double t, std::span<const double> x) const {
        if (!active) return;
        ParticleTrack& tr = (*tracks)[static_cast<std::size_t>(i)];
        tr.times.push_back(t);
        tr.states.insert(tr.states.end(), x.begin(), x.end());
        tr.drifts.insert(tr.drifts.end(), static_cast<std::size_t>(d), 0.0);
        tr.diffusions.insert(tr.diffusions.end(),
                             static_cast<std::size_t>(d) * static_cast<std::size_t>(k), 0.0);
    }
};

struct Engine {
    const McKeanVlasovModel& model;
    const SchemeConfig& cfg;
    const RunOptions& opts;
    int n = 0, d = 0, k = 0;
    bool use_cache = false;

    ParticleCloud cloud;
    std::vector<double> snapshot;   // measure atoms the current coefficients see
    InteractionCache cache;
    std::vector<char> frozen;
    std::vector<char> newly_corrupted;
    Trajectory traj;
    Recorder recorder;

    Engine(const McKeanVlasovModel& model_, const ParticleCloud& cloud0,
           std::span<BrownianPath> paths, const SchemeConfig& cfg_, const RunOptions& opts_)
        : model(model_), cfg(cfg_), opts(opts_), cloud(cloud0) {
        cfg.validate();
        n = cloud.count;
        d = cloud.dim;
        k = model.dim_noise();
        if (model.dim_state() != d)
            throw DimensionError("run: cloud dimension does not match the model state");
        if (static_cast<int>(paths.size()) != n)
            throw DimensionError("run: need exactly one Brownian path per particle");
        for (const auto& p : paths)
            if (p.dim() != k)
                throw DimensionError("run: Brownian path channel count does not match the model");
        use_cache = model.interaction_kind() == InteractionKind::separable;
        std::fill(cloud.clocks.begin(), cloud.clocks.end(), 0.0);
        std::fill(cloud.step_counts.begin(), cloud.step_counts.end(), std::int64_t{0});
        snapshot.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
        frozen.assign(static_cast<std::size_t>(n), 0);
        newly_corrupted.assign(static_cast<std::size_t>(n), 0);
        traj.horizon = cfg.horizon;
        traj.dim_noise = k;
        traj.coord_min.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::infinity());
        traj.coord_max.assign(static_cast<std::size_t>(d),
                              -std::numeric_limits<double>::infinity());
        for (int i = 0; i < n; ++i) note_bounds(cloud.state(i));
        if (opts.record_trajectory) {
            traj.tracks.resize(static_cast<std::size_t>(n));
            recorder.active = true;
            recorder.d = d;
            recorder.k = k;
            recorder.tracks = &traj.tracks;
        }
    }

    void note_bounds(std::span<const double> x) {
        for (int m = 0; m < d; ++m) {
            traj.coord_min[static_cast<std::size_t>(m)] =
                std::min(traj.coord_min[static_cast<std::size_t>(m)], x[static_cast<std::size_t>(m)]);
            traj.coord_max[static_cast<std::size_t>(m)] =
                std::max(traj.coord_max[static_cast<std::size_t>(m)], x[static_cast<std::size_t>(m)]);
        }
    }

    // Copy current states into the snapshot buffer and refresh the cache.
    EmpiricalMeasure take_snapshot() {
        std::copy(cloud.states.begin(), cloud.states.end(), snapshot.begin());
        EmpiricalMeasure mu(snapshot.data(), n, d);
        if (use_cache) model.measure_statistics(mu, cache);
        return mu;
    }

    void eval_coeffs(double t, int i, std::span<const double> x, const EmpiricalMeasure& mu,
                     EngineScratch& s) const {
        if (use_cache) {
            model.drift_cached(t, i, x, cache, s.b);
            model.diffusion_cached(t, i, x, cache, s.sigma);
        } else {
            model.drift(t, i, x, mu, s.b);
            model.diffusion(t, i, x, mu, s.sigma);
        }
    }

    // Deterministic corruption handling at a synchronisation point: freeze in
    // index order; in halt mode throw for the lowest corrupted index.
    void resolve_corruption(const std::vector<double>& times) {
        for (int i = 0; i < n; ++i) {
            if (!newly_corrupted[static_cast<std::size_t>(i)]) continue;
            if (opts.divergence == DivergencePolicy::halt)
                throw DivergedError(i, times[static_cast<std::size_t>(i)],
                                    "particle state left the trusted range (|x| > 1e100 or "
                                    "non-finite)");
            frozen[static_cast<std::size_t>(i)] = 1;
            traj.corrupted.push_back({i, times[static_cast<std::size_t>(i)]});
            newly_corrupted[static_cast<std::size_t>(i)] = 0;
        }
    }

    Trajectory finish(std::span<BrownianPath>) {
        for (int i = 0; i < n; ++i)
            if (!frozen[static_cast<std::size_t>(i)])
                recorder.terminal(i, cloud.clocks[static_cast<std::size_t>(i)], cloud.state(i));
        traj.final_cloud = std::move(cloud);
        return std::move(traj);
    }
};

// Drives the synchronised schemes (shared step for every particle, fresh
// measure snapshot each step): uniform/tamed Euler, Scheme 1, both Milsteins.
inline Trajectory run_synchronised(const McKeanVlasovModel& model, const ParticleCloud& cloud0,
                                   std::span<BrownianPath> paths,
                                   const TimeStepFunction* step_fn, const SchemeConfig& cfg,
                                   const RunOptions& opts, TamingMode taming, bool milstein) {
    Engine eng(model, cloud0, paths, cfg, opts);
    const int n = eng.n, d = eng.d, k = eng.k;
    const double T = cfg.horizon;
    const bool adaptive = cfg.is_adaptive();
    const double h_uniform = adaptive ? 0.0 : T / static_cast<double>(cfg.steps);
    const double tame_pow =
        taming == TamingMode::euler_pow ? std::pow(static_cast<double>(cfg.steps), -cfg.alpha) : 0.0;
    if (milstein && !model.has_milstein_correction())
        throw UnsupportedError("run: model provides no Milstein correction operator");

    std::vector<double> h_all(static_cast<std::size_t>(n), 0.0);
    std::vector<double> corrupt_time(static_cast<std::size_t>(n), 0.0);

    double t = 0.0;
    std::int64_t step_index = 0;
    while (t < T) {
        const EmpiricalMeasure mu = eng.take_snapshot();

        double h_min;
        if (adaptive) {
            std::atomic<bool> bad_step{false};
            parallel_for(opts.workers, n, [&](int begin, int end) {
                for (int i = begin; i < end; ++i) {
                    if (eng.frozen[static_cast<std::size_t>(i)]) {
                        h_all[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
                        continue;
                    }
                    const double hi = h_delta(*step_fn, eng.cloud.state(i));
                    h_all[static_cast<std::size_t>(i)] = hi;
                    if (!(hi > 0.0)) bad_step.store(true, std::memory_order_relaxed);
                }
            });
            if (bad_step.load())
                throw StepFunctionError("run: adaptive step function returned h <= 0");
            h_min = *std::min_element(h_all.begin(), h_all.end());
            if (!std::isfinite(h_min))
                break;  // everything frozen
        } else {
            h_min = h_uniform;
        }

        double h, t_next;
        if (adaptive) {
            if (t + h_min >= T) {
                h = T - t;
                t_next = T;
            } else {
                h = h_min;
                t_next = t + h_min;
            }
        } else {
            h = h_uniform;
            t_next = (step_index + 1 == cfg.steps) ? T : t + h_uniform;
        }

        const double tame_factor = taming == TamingMode::euler_pow ? tame_pow
                                   : taming == TamingMode::milstein_h ? h
                                                                      : 0.0;
        parallel_for(opts.workers, n, [&](int begin, int end) {
            EngineScratch s(d, k);
            for (int i = begin; i < end; ++i) {
                if (eng.frozen[static_cast<std::size_t>(i)]) continue;
                auto x = eng.cloud.state(i);
                eng.eval_coeffs(t, i, x, mu, s);
                if (taming != TamingMode::none) scale_drift_tamed(s.b, tame_factor);
                paths[static_cast<std::size_t>(i)].increment(t, t_next, s.dw);
                euler_update(x, s.b, s.sigma, h, s.dw, s.xnew);
                if (milstein) {
                    model.milstein_correction(x, s.lsig);
                    add_milstein_correction(s.lsig, d, k, s.dw, h, s.xnew);
                }
                model.post_step_hook(s.xnew);
                if (state_corrupted(s.xnew)) {
                    eng.newly_corrupted[static_cast<std::size_t>(i)] = 1;
                    corrupt_time[static_cast<std::size_t>(i)] = t_next;
                    continue;  // keep the last finite state
                }
                eng.recorder.knot(i, t, x, s.b, s.sigma);
                std::copy(s.xnew.begin(), s.xnew.end(), x.begin());
                eng.cloud.clocks[static_cast<std::size_t>(i)] = t_next;
                ++eng.cloud.step_counts[static_cast<std::size_t>(i)];
                eng.note_bounds(x);
            }
        });
        eng.resolve_corruption(corrupt_time);

        t = t_next;
        ++step_index;
        if (step_index > opts.max_steps_per_particle)
            throw Error("run: step budget exhausted (is the step function degenerate?)");
    }
    return eng.finish(paths);
}

}  // namespace detail

// Fixed mesh t_n = n T / M, plain drift, measure snapshot every step.
inline Trajectory run_uniform_euler(const McKeanVlasovModel& model, const ParticleCloud& cloud0,
                                    std::span<BrownianPath> paths, const SchemeConfig& cfg,
                                    const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::uniform_euler)
        throw ConfigError("run_uniform_euler: config kind mismatch");
    return detail::run_synchronised(model, cloud0, paths, nullptr, cfg, opts,
                                    detail::TamingMode::none, false);
}

// Fixed mesh with the drift tamed to b / (1 + M^(-alpha) |b|).
inline Trajectory run_tamed_euler(const McKeanVlasovModel& model, const ParticleCloud& cloud0,
                                  std::span<BrownianPath> paths, const SchemeConfig& cfg,
                                  const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::tamed_euler)
        throw ConfigError("run_tamed_euler: config kind mismatch");
    return detail::run_synchronised(model, cloud0, paths, nullptr, cfg, opts,
                                    detail::TamingMode::euler_pow, false);
}

namespace detail {
inline void check_step_fn(const TimeStepFunction& f, const SchemeConfig& cfg) {
    if (f.delta != cfg.delta)
        throw ConfigError("run: step function delta does not match the scheme config");
    if (f.horizon != cfg.horizon)
        throw ConfigError("run: step function horizon does not match the scheme config");
}
}  // namespace detail

// Scheme 1: every particle advances with the cloud-wide minimum of the
// adaptive steps; the measure snapshot is refreshed at every step, so all
// particle clocks stay equal.
inline Trajectory run_scheme1_adaptive_euler(const McKeanVlasovModel& model,
                                             const ParticleCloud& cloud0,
                                             std::span<BrownianPath> paths,
                                             const TimeStepFunction& step_fn,
                                             const SchemeConfig& cfg, const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::scheme1_adaptive_euler)
        throw ConfigError("run_scheme1_adaptive_euler: config kind mismatch");
    detail::check_step_fn(step_fn, cfg);
    return detail::run_synchronised(model, cloud0, paths, &step_fn, cfg, opts,
                                    detail::TamingMode::none, false);
}

// Scheme 1 plus the commutative Milstein correction (untamed drift).
inline Trajectory run_adaptive_milstein(const McKeanVlasovModel& model,
                                        const ParticleCloud& cloud0,
                                        std::span<BrownianPath> paths,
                                        const TimeStepFunction& step_fn, const SchemeConfig& cfg,
                                        const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::adaptive_milstein)
        throw ConfigError("run_adaptive_milstein: config kind mismatch");
    detail::check_step_fn(step_fn, cfg);
    return detail::run_synchronised(model, cloud0, paths, &step_fn, cfg, opts,
                                    detail::TamingMode::none, true);
}

// Fixed mesh Milstein with drift tamed to b / (1 + h |b|).
inline Trajectory run_tamed_milstein(const McKeanVlasovModel& model, const ParticleCloud& cloud0,
                                     std::span<BrownianPath> paths, const SchemeConfig& cfg,
                                     const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::tamed_milstein)
        throw ConfigError("run_tamed_milstein: config kind mismatch");
    return detail::run_synchronised(model, cloud0, paths, nullptr, cfg, opts,
                                    detail::TamingMode::milstein_h, true);
}

// Scheme 2: time is cut into M = 1/delta blocks of length delta T. The
// measure is frozen at the block boundary; inside a block every particle
// walks its own adaptive mesh, clamped so the final step lands exactly on the
// block end (the boundary time is assigned, not accumulated). Block
// boundaries are the synchronisation barriers.
inline Trajectory run_scheme2_adaptive_euler(const McKeanVlasovModel& model,
                                             const ParticleCloud& cloud0,
                                             std::span<BrownianPath> paths,
                                             const TimeStepFunction& step_fn,
                                             const SchemeConfig& cfg, const RunOptions& opts = {}) {
    if (cfg.kind != SchemeKind::scheme2_adaptive_euler)
        throw ConfigError("run_scheme2_adaptive_euler: config kind mismatch");
    detail::check_step_fn(step_fn, cfg);
    detail::Engine eng(model, cloud0, paths, cfg, opts);
    const int n = eng.n, d = eng.d, k = eng.k;
    const double T = cfg.horizon;
    const int blocks = cfg.block_count();
    const double block_len = cfg.delta * T;

    std::vector<double> corrupt_time(static_cast<std::size_t>(n), 0.0);
    std::vector<char> step_error(static_cast<std::size_t>(n), 0);
    std::vector<char> budget_error(static_cast<std::size_t>(n), 0);

    for (int blk = 0; blk < blocks; ++blk) {
        const double block_start = static_cast<double>(blk) * block_len;
        const double block_end = (blk + 1 == blocks) ? T : static_cast<double>(blk + 1) * block_len;
        const EmpiricalMeasure mu = eng.take_snapshot();

        parallel_for(opts.workers, n, [&](int begin, int end) {
            detail::EngineScratch s(d, k);
            for (int i = begin; i < end; ++i) {
                if (eng.frozen[static_cast<std::size_t>(i)]) continue;
                auto x = eng.cloud.state(i);
                double t = block_start;
                while (t < block_end) {
                    const double h_prop = h_delta(step_fn, x);
                    if (!(h_prop > 0.0)) {
                        step_error[static_cast<std::size_t>(i)] = 1;
                        break;
                    }
                    double h, t_next;
                    if (h_prop >= block_end - t) {
                        h = block_end - t;
                        t_next = block_end;
                    } else {
                        h = h_prop;
                        t_next = t + h_prop;
                    }
                    eng.eval_coeffs(t, i, x, mu, s);
                    paths[static_cast<std::size_t>(i)].increment(t, t_next, s.dw);
                    detail::euler_update(x, s.b, s.sigma, h, s.dw, s.xnew);
                    model.post_step_hook(s.xnew);
                    if (detail::state_corrupted(s.xnew)) {
                        eng.newly_corrupted[static_cast<std::size_t>(i)] = 1;
                        corrupt_time[static_cast<std::size_t>(i)] = t_next;
                        break;
                    }
                    eng.recorder.knot(i, t, x, s.b, s.sigma);
                    std::copy(s.xnew.begin(), s.xnew.end(), x.begin());
                    ++eng.cloud.step_counts[static_cast<std::size_t>(i)];
                    eng.note_bounds(x);
                    t = t_next;
                    if (eng.cloud.step_counts[static_cast<std::size_t>(i)] >
                        opts.max_steps_per_particle) {
                        budget_error[static_cast<std::size_t>(i)] = 1;
                        break;
                    }
                }
                if (!eng.newly_corrupted[static_cast<std::size_t>(i)] &&
                    !step_error[static_cast<std::size_t>(i)] &&
                    !budget_error[static_cast<std::size_t>(i)])
                    eng.cloud.clocks[static_cast<std::size_t>(i)] = block_end;
            }
        });
        for (int i = 0; i < n; ++i) {
            if (step_error[static_cast<std::size_t>(i)])
                throw StepFunctionError("run: adaptive step function returned h <= 0");
            if (budget_error[static_cast<std::size_t>(i)])
                throw Error("run: step budget exhausted (is the step function degenerate?)");
        }
        eng.resolve_corruption(corrupt_time);
    }
    return eng.finish(paths);
}

// Dispatch by config kind; adaptive kinds require step_fn.
inline Trajectory run_scheme(const McKeanVlasovModel& model, const ParticleCloud& cloud0,
                             std::span<BrownianPath> paths, const TimeStepFunction* step_fn,
                             const SchemeConfig& cfg, const RunOptions& opts = {}) {
    if (cfg.is_adaptive() && step_fn == nullptr)
        throw ConfigError("run_scheme: adaptive scheme needs a step function");
    switch (cfg.kind) {
        case SchemeKind::uniform_euler: return run_uniform_euler(model, cloud0, paths, cfg, opts);
        case SchemeKind::tamed_euler: return run_tamed_euler(model, cloud0, paths, cfg, opts);
        case SchemeKind::scheme1_adaptive_euler:
            return run_scheme1_adaptive_euler(model, cloud0, paths, *step_fn, cfg, opts);
        case SchemeKind::scheme2_adaptive_euler:
            return run_scheme2_adaptive_euler(model, cloud0, paths, *step_fn, cfg, opts);
        case SchemeKind::tamed_milstein: return run_tamed_milstein(model, cloud0, paths, cfg, opts);
        case SchemeKind::adaptive_milstein:
            return run_adaptive_milstein(model, cloud0, paths, *step_fn, cfg, opts);
    }
    throw ConfigError("run_scheme: unknown scheme kind");
}

}  // namespace mvsde
