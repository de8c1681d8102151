#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mvsde/errors.hpp"

namespace mvsde {

// N interacting particles with d-dimensional states in one flat buffer.
// clocks hold each particle's model time: uniform schemes and Scheme 1 keep
// them all equal, Scheme 2 lets them spread inside a block and re-aligns them
// at block boundaries. step_counts accumulate accepted steps per particle.
struct ParticleCloud {
    int count = 0;
    int dim = 0;
    std::vector<double> states;              // count * dim
    std::vector<double> clocks;              // count
    std::vector<std::int64_t> step_counts;   // count

    ParticleCloud() = default;
    ParticleCloud(int count_, int dim_)
        : count(count_),
          dim(dim_),
          states(static_cast<std::size_t>(count_) * static_cast<std::size_t>(dim_), 0.0),
          clocks(static_cast<std::size_t>(count_), 0.0),
          step_counts(static_cast<std::size_t>(count_), 0) {
        if (count_ < 1 || dim_ < 1)
            throw DomainError("ParticleCloud: count and dim must be >= 1");
    }

    std::span<double> state(int i) {
        return {states.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> state(int i) const {
        return {states.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

// Non-owning view of N equally weighted atoms in R^d. Schemes decide when a
// snapshot is taken (every step, or frozen at a block boundary); the view
// itself never copies.
class EmpiricalMeasure {
public:
    EmpiricalMeasure(const double* data, int count, int dim)
        : data_(data), count_(count), dim_(dim) {
        if (count < 1 || dim < 1)
            throw DomainError("EmpiricalMeasure: count and dim must be >= 1");
    }

    static EmpiricalMeasure of(const ParticleCloud& cloud) {
        return EmpiricalMeasure(cloud.states.data(), cloud.count, cloud.dim);
    }

    int count() const { return count_; }
    int dim() const { return dim_; }
    double weight() const { return 1.0 / static_cast<double>(count_); }
    std::span<const double> atom(int i) const {
        return {data_ + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }

private:
    const double* data_;
    int count_;
    int dim_;
};

// Index-aligned coupling bound sqrt((1/N) sum_i |x_i - y_i|^2). This is the
// transport cost of the identity coupling, hence an upper bound on the exact
// W2 distance; the particle-vs-limit theory only ever needs this bound.
inline double wasserstein2_upper_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.count() != b.count())
        throw DimensionError("wasserstein2_upper_bound: particle counts differ");
    if (a.dim() != b.dim())
        throw DimensionError("wasserstein2_upper_bound: state dimensions differ");
    double acc = 0.0;
    for (int i = 0; i < a.count(); ++i) {
        const auto xa = a.atom(i);
        const auto xb = b.atom(i);
        for (int m = 0; m < a.dim(); ++m) {
            const double diff = xa[static_cast<std::size_t>(m)] - xb[static_cast<std::size_t>(m)];
            acc += diff * diff;
        }
    }
    return std::sqrt(acc / static_cast<double>(a.count()));
}

// Dimension-dependent propagation-of-chaos rate:
//   d < 4 : N^(-1/2),  d = 4 : N^(-1/2) * ln N  (natural log),  d > 4 : N^(-2/d).
inline double phi(int n_particles, int dim) {
    if (n_particles < 2) throw DomainError("phi: N must be >= 2");
    if (dim < 1) throw DomainError("phi: d must be >= 1");
    const double n = static_cast<double>(n_particles);
    if (dim < 4) return 1.0 / std::sqrt(n);
    if (dim == 4) return std::log(n) / std::sqrt(n);
    return std::pow(n, -2.0 / static_cast<double>(dim));
}

}  // namespace mvsde
