#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mvsde/brownian.hpp"
#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"

namespace mvsde {

// Per-particle record of accepted step times, states, and the coefficient
// snapshots (b, sigma) used at each knot; filled only when a run asks for it.
struct ParticleTrack {
    std::vector<double> times;       // strictly increasing, first 0, last T
    std::vector<double> states;      // times.size() * dim
    std::vector<double> drifts;      // times.size() * dim (snapshot at the knot)
    std::vector<double> diffusions;  // times.size() * dim * dim_noise
};

struct CorruptionEvent {
    int particle = -1;
    double time = 0.0;
};

// Result of one scheme run over [0, T].
struct Trajectory {
    ParticleCloud final_cloud;
    double horizon = 1.0;
    int dim_noise = 1;
    std::vector<CorruptionEvent> corrupted;  // frozen particles, if any
    std::vector<ParticleTrack> tracks;       // empty unless recorded
    std::vector<double> coord_min, coord_max;  // per-dimension bounds over all accepted states

    bool particle_corrupted(int i) const {
        for (const auto& c : corrupted)
            if (c.particle == i) return true;
        return false;
    }
};

// Continuous interpolant between knots: from the last knot at or before t,
//   X(t) = X_k + b_k (t - t_k) + sigma_k (W_t - W_{t_k}),
// with a bridge query against the same path the run consumed. At a knot the
// stored state is returned exactly.
inline std::vector<double> interpolate(const Trajectory& traj, int particle, double t,
                                       BrownianPath& path) {
    if (t < 0.0 || t > traj.horizon)
        throw DomainError("interpolate: t outside [0, T]");
    if (traj.tracks.empty())
        throw UnsupportedError("interpolate: run was not recorded (record_trajectory=false)");
    const ParticleTrack& track = traj.tracks[static_cast<std::size_t>(particle)];
    const int d = traj.final_cloud.dim;
    const int k = traj.dim_noise;
    // Last knot with time <= t.
    const auto it = std::upper_bound(track.times.begin(), track.times.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - track.times.begin());
    if (idx == 0) throw LogicError("interpolate: no knot at or before t");
    --idx;
    const std::size_t sd = static_cast<std::size_t>(d);
    std::vector<double> out(track.states.begin() + static_cast<std::ptrdiff_t>(idx * sd),
                            track.states.begin() + static_cast<std::ptrdiff_t>((idx + 1) * sd));
    if (track.times[idx] == t) return out;
    const double dt = t - track.times[idx];
    std::vector<double> w0(static_cast<std::size_t>(k)), w1(static_cast<std::size_t>(k));
    path.sample_at(track.times[idx], w0);
    path.sample_at(t, w1);
    for (int m = 0; m < d; ++m) {
        double v = out[static_cast<std::size_t>(m)] +
                   track.drifts[idx * sd + static_cast<std::size_t>(m)] * dt;
        for (int j = 0; j < k; ++j)
            v += track.diffusions[(idx * sd + static_cast<std::size_t>(m)) *
                                      static_cast<std::size_t>(k) +
                                  static_cast<std::size_t>(j)] *
                 (w1[static_cast<std::size_t>(j)] - w0[static_cast<std::size_t>(j)]);
        out[static_cast<std::size_t>(m)] = v;
    }
    return out;
}

}  // namespace mvsde
