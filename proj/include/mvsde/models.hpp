#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvsde/cloud.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/model.hpp"

namespace mvsde {

namespace detail {

// Mean of a one-dimensional empirical measure.
inline double measure_mean_1d(const EmpiricalMeasure& mu) {
    double sum = 0.0;
    for (int j = 0; j < mu.count(); ++j) sum += mu.atom(j)[0];
    return sum / static_cast<double>(mu.count());
}

}  // namespace detail

// d = k = 1. Drift −x/(1−x²) + mean pushes the state back inside the open
// unit ball; a post-step projection keeps |x| ≤ r_max so the singular factor
// stays finite. Diffusion is additive unit noise.
class BallConfinedMeanField final : public McKeanVlasovModel {
public:
    static constexpr double kRadiusMax = 1.0 - 1e-10;

    int dim_state() const override { return 1; }
    int dim_noise() const override { return 1; }
    InteractionKind interaction_kind() const override { return InteractionKind::separable; }

    void drift(double, int, std::span<const double> x, const EmpiricalMeasure& mu,
               std::span<double> out) const override {
        out[0] = own_drift(x[0]) + detail::measure_mean_1d(mu);
    }
    void diffusion(double, int, std::span<const double>, const EmpiricalMeasure&,
                   std::span<double> out) const override {
        out[0] = 1.0;
    }

    void measure_statistics(const EmpiricalMeasure& mu, InteractionCache& cache) const override {
        cache.values.assign(1, detail::measure_mean_1d(mu));
    }
    void drift_cached(double, int, std::span<const double> x, const InteractionCache& cache,
                      std::span<double> out) const override {
        out[0] = own_drift(x[0]) + cache.values[0];
    }
    void diffusion_cached(double, int, std::span<const double>, const InteractionCache&,
                          std::span<double> out) const override {
        out[0] = 1.0;
    }

    // Radial projection back onto the ball of radius r_max; in one dimension
    // this is sign(x)·r_max. Applied after every accepted step.
    void post_step_hook(std::span<double> x) const override {
        double norm2 = 0.0;
        for (double c : x) norm2 += c * c;
        if (norm2 > kRadiusMax * kRadiusMax) {
            const double scale = kRadiusMax / std::sqrt(norm2);
            for (double& c : x) c *= scale;
        }
    }

private:
    static double own_drift(double x) { return -x / (1.0 - x * x); }
};

// d = k = 1. Drift (σ²/2)x − x³ + c·mean with multiplicative diffusion σx.
class GinzburgLandauMeanField final : public McKeanVlasovModel {
public:
    GinzburgLandauMeanField(double sigma, double c) : sigma_(sigma), c_(c) {}

    int dim_state() const override { return 1; }
    int dim_noise() const override { return 1; }
    InteractionKind interaction_kind() const override { return InteractionKind::separable; }

    void drift(double, int, std::span<const double> x, const EmpiricalMeasure& mu,
               std::span<double> out) const override {
        out[0] = own_drift(x[0]) + c_ * detail::measure_mean_1d(mu);
    }
    void diffusion(double, int, std::span<const double> x, const EmpiricalMeasure&,
                   std::span<double> out) const override {
        out[0] = sigma_ * x[0];
    }

    void measure_statistics(const EmpiricalMeasure& mu, InteractionCache& cache) const override {
        cache.values.assign(1, detail::measure_mean_1d(mu));
    }
    void drift_cached(double, int, std::span<const double> x, const InteractionCache& cache,
                      std::span<double> out) const override {
        out[0] = own_drift(x[0]) + c_ * cache.values[0];
    }
    void diffusion_cached(double, int, std::span<const double> x, const InteractionCache&,
                          std::span<double> out) const override {
        out[0] = sigma_ * x[0];
    }

    double sigma() const { return sigma_; }
    double mean_coupling() const { return c_; }

private:
    double own_drift(double x) const { return 0.5 * sigma_ * sigma_ * x - x * x * x; }

    double sigma_;
    double c_;
};

// d = k = 1. Oscillator i carries a frozen intrinsic rate η_i; drift
// η_i + x − x³ + (1/N)Σ_j sin(x − x_j) with constant diffusion σ. The sine
// kernel splits as sin(x)·mean(cos X) − cos(x)·mean(sin X), so the
// interaction reduces to two scalar statistics.
class KuramotoCubic final : public McKeanVlasovModel {
public:
    KuramotoCubic(double sigma, std::vector<double> intrinsic_rates)
        : sigma_(sigma), eta_(std::move(intrinsic_rates)) {
        if (eta_.empty()) throw DomainError("KuramotoCubic needs at least one intrinsic rate");
    }

    int dim_state() const override { return 1; }
    int dim_noise() const override { return 1; }
    InteractionKind interaction_kind() const override { return InteractionKind::separable; }

    void drift(double, int particle, std::span<const double> x, const EmpiricalMeasure& mu,
               std::span<double> out) const override {
        const double xi = x[0];
        double interaction = 0.0;
        for (int j = 0; j < mu.count(); ++j) interaction += std::sin(xi - mu.atom(j)[0]);
        interaction /= static_cast<double>(mu.count());
        out[0] = own_drift(particle, xi) + interaction;
    }
    void diffusion(double, int, std::span<const double>, const EmpiricalMeasure&,
                   std::span<double> out) const override {
        out[0] = sigma_;
    }

    void measure_statistics(const EmpiricalMeasure& mu, InteractionCache& cache) const override {
        double mean_sin = 0.0;
        double mean_cos = 0.0;
        for (int j = 0; j < mu.count(); ++j) {
            mean_sin += std::sin(mu.atom(j)[0]);
            mean_cos += std::cos(mu.atom(j)[0]);
        }
        const double n = static_cast<double>(mu.count());
        cache.values.assign({mean_sin / n, mean_cos / n});
    }
    void drift_cached(double, int particle, std::span<const double> x,
                      const InteractionCache& cache, std::span<double> out) const override {
        const double xi = x[0];
        out[0] = own_drift(particle, xi) + std::sin(xi) * cache.values[1] -
                 std::cos(xi) * cache.values[0];
    }
    void diffusion_cached(double, int, std::span<const double>, const InteractionCache&,
                          std::span<double> out) const override {
        out[0] = sigma_;
    }

    const std::vector<double>& intrinsic_rates() const { return eta_; }

private:
    double own_drift(int particle, double x) const {
        if (particle < 0 || particle >= static_cast<int>(eta_.size()))
            throw DomainError("KuramotoCubic: particle index " + std::to_string(particle) +
                              " has no intrinsic rate (model built for " +
                              std::to_string(eta_.size()) + " particles)");
        return eta_[static_cast<std::size_t>(particle)] + x - x * x * x;
    }

    double sigma_;
    std::vector<double> eta_;
};

// d = k = 1. Drift −x⁵ + mean with geometric diffusion σ(x) = x; the
// derivative-operator product for the second-order correction is
// L¹σ₁ = σσ' = x.
class QuinticInteractingGBM final : public McKeanVlasovModel {
public:
    int dim_state() const override { return 1; }
    int dim_noise() const override { return 1; }
    InteractionKind interaction_kind() const override { return InteractionKind::separable; }

    void drift(double, int, std::span<const double> x, const EmpiricalMeasure& mu,
               std::span<double> out) const override {
        out[0] = own_drift(x[0]) + detail::measure_mean_1d(mu);
    }
    void diffusion(double, int, std::span<const double> x, const EmpiricalMeasure&,
                   std::span<double> out) const override {
        out[0] = x[0];
    }

    void measure_statistics(const EmpiricalMeasure& mu, InteractionCache& cache) const override {
        cache.values.assign(1, detail::measure_mean_1d(mu));
    }
    void drift_cached(double, int, std::span<const double> x, const InteractionCache& cache,
                      std::span<double> out) const override {
        out[0] = own_drift(x[0]) + cache.values[0];
    }
    void diffusion_cached(double, int, std::span<const double> x, const InteractionCache&,
                          std::span<double> out) const override {
        out[0] = x[0];
    }

    bool has_milstein_correction() const override { return true; }
    void milstein_correction(std::span<const double> x, std::span<double> out) const override {
        out[0] = x[0];
    }

private:
    static double own_drift(double x) {
        const double x2 = x * x;
        return -x2 * x2 * x;
    }
};

}  // namespace mvsde
