#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

// Lazily sampled Brownian motion with dim() independent channels sharing one
// set of knot times. Values are drawn on first query and are permanent:
//   - beyond the last knot, from the independent-increment law,
//   - between two knots, from the Brownian bridge law conditioned on them.
// Refining a path with extra interior queries never changes existing knots,
// which is what couples coarse and fine meshes driven by the same path.
// Queries within `time_tolerance` of an existing knot reuse that knot, so two
// discretisation levels that compute "the same" block boundary with different
// floating-point roundings agree. Single writer: one simulation thread may
// query a given path at a time.
class BrownianPath {
public:
    // Channel c draws from stream (base.experiment, base.particle, c); the
    // channel field of `base` is ignored.
    BrownianPath(const SeedSpec& base, int dim, double time_tolerance = 1e-12)
        : dim_(dim), tol_(time_tolerance) {
        if (dim < 1) throw DomainError("BrownianPath: dim must be >= 1");
        rngs_.reserve(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c) {
            SeedSpec s = base;
            s.channel = static_cast<std::uint32_t>(c);
            rngs_.emplace_back(s);
        }
        times_.push_back(0.0);
        values_.assign(static_cast<std::size_t>(dim), 0.0);  // W(0) = 0
    }

    int dim() const { return dim_; }
    std::size_t knot_count() const { return times_.size(); }
    const std::vector<double>& knot_times() const { return times_; }

    // W(t), one value per channel. Inserts a knot unless t matches one.
    void sample_at(double t, std::span<double> out) {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw DomainError("BrownianPath::sample_at: t must be finite and >= 0");
        const std::size_t k = static_cast<std::size_t>(dim_);
        // times_ is sorted; find the first knot >= t - tol.
        const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol_);
        const std::size_t idx = static_cast<std::size_t>(it - times_.begin());
        if (idx < times_.size() && std::abs(times_[idx] - t) <= tol_) {
            std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(idx * k), k, out.begin());
            return;
        }
        if (idx == times_.size()) {
            // Beyond the last knot: W(t) = W(last) + sqrt(t - last) * Z.
            const double dt = t - times_.back();
            const double sd = std::sqrt(dt);
            const std::size_t tail = (times_.size() - 1) * k;
            for (std::size_t c = 0; c < k; ++c)
                out[c] = values_[tail + c] + sd * rngs_[c].normal();
        } else {
            // Bridge between knots idx-1 and idx (idx >= 1 since times_[0] = 0
            // and t > tol would have matched it otherwise).
            const double t0 = times_[idx - 1];
            const double t1 = times_[idx];
            const double lam = (t - t0) / (t1 - t0);
            const double sd = std::sqrt((t1 - t) * (t - t0) / (t1 - t0));
            const std::size_t lo = (idx - 1) * k, hi = idx * k;
            for (std::size_t c = 0; c < k; ++c) {
                const double mean = values_[lo + c] + lam * (values_[hi + c] - values_[lo + c]);
                out[c] = mean + sd * rngs_[c].normal();
            }
        }
        times_.insert(times_.begin() + static_cast<std::ptrdiff_t>(idx), t);
        values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(idx * k), out.begin(),
                       out.end());
    }

    std::vector<double> sample_at(double t) {
        std::vector<double> out(static_cast<std::size_t>(dim_));
        sample_at(t, out);
        return out;
    }

    // W(t1) - W(t0) per channel; samples t0 first, then t1.
    void increment(double t0, double t1, std::span<double> out) {
        if (t1 < t0) throw DomainError("BrownianPath::increment: t1 < t0");
        std::vector<double> w0(static_cast<std::size_t>(dim_));
        sample_at(t0, w0);
        sample_at(t1, out);
        for (int c = 0; c < dim_; ++c) out[static_cast<std::size_t>(c)] -= w0[static_cast<std::size_t>(c)];
    }

    std::vector<double> increment(double t0, double t1) {
        std::vector<double> out(static_cast<std::size_t>(dim_));
        increment(t0, t1, out);
        return out;
    }

    // Knot value by index (channel-major row), for tests and inspection.
    std::span<const double> knot_value(std::size_t i) const {
        return {values_.data() + i * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }

private:
    int dim_;
    double tol_;
    std::vector<CounterRng> rngs_;   // one stream per channel
    std::vector<double> times_;      // sorted knot times
    std::vector<double> values_;     // knot_count * dim, row per knot
};

// One path per particle: particle i uses streams (experiment, i, channel).
// Paths for particles first_particle .. first_particle + count - 1. The
// offset lets a sub-system reuse exactly the streams a larger system would
// assign to those particle indices.
inline std::vector<BrownianPath> make_paths(std::uint64_t master_seed, std::uint32_t experiment,
                                            int count, int dim, double time_tolerance = 1e-12,
                                            int first_particle = 0) {
    std::vector<BrownianPath> paths;
    paths.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SeedSpec s;
        s.master_seed = master_seed;
        s.experiment = experiment;
        s.particle = static_cast<std::uint32_t>(first_particle + i);
        paths.emplace_back(s, dim, time_tolerance);
    }
    return paths;
}

}  // namespace mvsde
