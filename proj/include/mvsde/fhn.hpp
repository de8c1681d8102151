#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mvsde/cloud.hpp"
#include "mvsde/config.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/model.hpp"

namespace mvsde {

// Constants of one neuron population: membrane recovery (a, b, c), input
// current I, synaptic channel rates (a_r, a_d), sigmoid gate (T_max, lambda,
// V_T), noise mollifier (Gamma, Lambda), and external voltage noise.
struct FhnPopulationParams {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double I = 0.0;
    double a_r = 0.0;
    double a_d = 0.0;
    double T_max = 0.0;
    double lambda = 0.0;
    double V_T = 0.0;
    double Gamma = 0.0;
    double Lambda = 0.0;
    double sigma_ext = 0.0;
};

// Full network parameter set: per-population constants plus the pairwise
// coupling matrices (row = receiving population alpha, column = sending
// population gamma).
struct FhnParams {
    std::vector<FhnPopulationParams> pops;
    std::vector<double> j_bar;    // P×P synaptic weights J̄_{αγ}
    std::vector<double> v_rev;    // P×P reversal potentials V_rev^{αγ}
    std::vector<double> sigma_j;  // P×P synaptic noise scales σ^J_{αγ}
    double step_gamma = 1.0;      // scale of the adaptive step rule

    int population_count() const { return static_cast<int>(pops.size()); }

    double coupling(const std::vector<double>& mat, int alpha, int gamma) const {
        return mat[static_cast<std::size_t>(alpha) * pops.size() + static_cast<std::size_t>(gamma)];
    }

    // Every model constant must be present; scalars are broadcast across the
    // (optional, default 1) number of populations. Reports all missing keys
    // at once.
    static FhnParams from_config(const ParamTable& cfg) {
        static const char* const kRequired[] = {
            "a",     "b",      "c",      "I",     "a_r",       "a_d",
            "T_max", "lambda", "V_T",    "Gamma", "Lambda",    "sigma_ext",
            "J_bar", "V_rev",  "sigma_J"};
        std::string missing;
        for (const char* key : kRequired) {
            if (!cfg.has(key)) {
                if (!missing.empty()) missing += ", ";
                missing += key;
            }
        }
        if (!missing.empty())
            throw ConfigError("missing required model parameters: " + missing);

        const int populations = static_cast<int>(cfg.get_int("populations", 1));
        if (populations < 1) throw ConfigError("'populations' must be >= 1");

        FhnPopulationParams p;
        p.a = cfg.require_real("a");
        p.b = cfg.require_real("b");
        p.c = cfg.require_real("c");
        p.I = cfg.require_real("I");
        p.a_r = cfg.require_real("a_r");
        p.a_d = cfg.require_real("a_d");
        p.T_max = cfg.require_real("T_max");
        p.lambda = cfg.require_real("lambda");
        p.V_T = cfg.require_real("V_T");
        p.Gamma = cfg.require_real("Gamma");
        p.Lambda = cfg.require_real("Lambda");
        p.sigma_ext = cfg.require_real("sigma_ext");

        FhnParams out;
        out.pops.assign(static_cast<std::size_t>(populations), p);
        const std::size_t pairs = static_cast<std::size_t>(populations) *
                                  static_cast<std::size_t>(populations);
        out.j_bar.assign(pairs, cfg.require_real("J_bar"));
        out.v_rev.assign(pairs, cfg.require_real("V_rev"));
        out.sigma_j.assign(pairs, cfg.require_real("sigma_J"));
        out.step_gamma = cfg.get_real("step_gamma", 1.0);
        if (out.step_gamma <= 0.0) throw ConfigError("'step_gamma' must be > 0");
        return out;
    }
};

// Sigmoid synaptic activation S(V) = T_max / (1 + exp(-lambda (V - V_T))).
inline double fhn_sigmoid(const FhnPopulationParams& p, double v) {
    return p.T_max / (1.0 + std::exp(-p.lambda * (v - p.V_T)));
}

// Mollifier with compact support in (0,1):
// chi(y) = Gamma * exp(-Lambda / (1 - (2y-1)^2)) for y in (0,1), else 0.
inline double fhn_channel_bump(const FhnPopulationParams& p, double y) {
    if (!(y > 0.0 && y < 1.0)) return 0.0;
    const double u = 2.0 * y - 1.0;
    return p.Gamma * std::exp(-p.Lambda / (1.0 - u * u));
}

// Gating noise sqrt(a_r S(V)(1-y) + a_d y) * chi(y). The square-root
// argument is clamped at zero before the root (full truncation), so states
// pushed outside [0,1] by the discretisation never produce NaN.
inline double fhn_gate_noise(const FhnPopulationParams& p, double v, double y) {
    const double bump = fhn_channel_bump(p, y);
    if (bump == 0.0) return 0.0;
    const double arg = p.a_r * fhn_sigmoid(p, v) * (1.0 - y) + p.a_d * y;
    return std::sqrt(arg > 0.0 ? arg : 0.0) * bump;
}

// Drift of one neuron in population alpha given the per-population gating
// means: own dynamics f_alpha plus the synaptic input
// sum_gamma -J̄_{αγ}(V - V_rev^{αγ})·meanY_γ in the voltage component.
inline void fhn_drift(double /*t*/, std::span<const double> x,
                      std::span<const double> mean_y, const FhnParams& params,
                      int alpha, std::span<double> out) {
    const FhnPopulationParams& p = params.pops[static_cast<std::size_t>(alpha)];
    const double v = x[0];
    const double w = x[1];
    const double y = x[2];
    double synaptic = 0.0;
    for (int g = 0; g < params.population_count(); ++g)
        synaptic -= params.coupling(params.j_bar, alpha, g) *
                    (v - params.coupling(params.v_rev, alpha, g)) * mean_y[static_cast<std::size_t>(g)];
    out[0] = v - v * v * v / 3.0 - w + p.I + synaptic;
    out[1] = p.c * (v + p.a - p.b * w);
    out[2] = p.a_r * fhn_sigmoid(p, v) * (1.0 - y) - p.a_d * y;
}

// Diffusion rows (V, w, y) by columns (external noise, gating noise, one
// synaptic channel per sending population).
inline void fhn_diffusion(double /*t*/, std::span<const double> x,
                          std::span<const double> mean_y, const FhnParams& params,
                          int alpha, std::span<double> out) {
    const FhnPopulationParams& p = params.pops[static_cast<std::size_t>(alpha)];
    const int pcount = params.population_count();
    const int k = 2 + pcount;
    const double v = x[0];
    const double y = x[2];
    for (int m = 0; m < 3; ++m)
        for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(m * k + j)] = 0.0;
    out[0] = p.sigma_ext;
    out[static_cast<std::size_t>(2 * k + 1)] = fhn_gate_noise(p, v, y);
    for (int g = 0; g < pcount; ++g)
        out[static_cast<std::size_t>(2 + g)] =
            -params.coupling(params.sigma_j, alpha, g) *
            (v - params.coupling(params.v_rev, alpha, g)) * mean_y[static_cast<std::size_t>(g)];
}

// Interacting network of FitzHugh-Nagumo neurons. State per particle is
// (V, w, y); noise channels are (external, gating, P synaptic). Interaction
// enters drift and diffusion only through the per-population mean of the
// gating variable y, so both evaluation routes are offered and the cached
// route costs O(N) per step.
class FitzHughNagumoNetwork final : public McKeanVlasovModel {
public:
    FitzHughNagumoNetwork(FhnParams params, std::vector<int> population_of)
        : params_(std::move(params)), population_of_(std::move(population_of)) {
        if (params_.pops.empty()) throw DomainError("network needs at least one population");
        for (int g : population_of_)
            if (g < 0 || g >= params_.population_count())
                throw DomainError("population label out of range");
    }

    int dim_state() const override { return 3; }
    int dim_noise() const override { return 2 + params_.population_count(); }
    InteractionKind interaction_kind() const override { return InteractionKind::separable; }

    void drift(double t, int particle, std::span<const double> x, const EmpiricalMeasure& mu,
               std::span<double> out) const override {
        std::vector<double> mean_y;
        gating_means(mu, mean_y);
        fhn_drift(t, x, mean_y, params_, population_label(particle), out);
    }
    void diffusion(double t, int particle, std::span<const double> x, const EmpiricalMeasure& mu,
                   std::span<double> out) const override {
        std::vector<double> mean_y;
        gating_means(mu, mean_y);
        fhn_diffusion(t, x, mean_y, params_, population_label(particle), out);
    }

    void measure_statistics(const EmpiricalMeasure& mu, InteractionCache& cache) const override {
        gating_means(mu, cache.values);
    }
    void drift_cached(double t, int particle, std::span<const double> x,
                      const InteractionCache& cache, std::span<double> out) const override {
        fhn_drift(t, x, cache.values, params_, population_label(particle), out);
    }
    void diffusion_cached(double t, int particle, std::span<const double> x,
                          const InteractionCache& cache, std::span<double> out) const override {
        fhn_diffusion(t, x, cache.values, params_, population_label(particle), out);
    }

    const FhnParams& params() const { return params_; }
    int population_label(int particle) const {
        if (particle >= 0 && particle < static_cast<int>(population_of_.size()))
            return population_of_[static_cast<std::size_t>(particle)];
        if (params_.population_count() == 1) return 0;
        throw DomainError("particle index " + std::to_string(particle) +
                          " has no population label");
    }

private:
    // Mean of y per population. Atoms beyond the labelled range count toward
    // population 0, which keeps single-population use valid for any cloud.
    void gating_means(const EmpiricalMeasure& mu, std::vector<double>& out) const {
        const int pcount = params_.population_count();
        out.assign(static_cast<std::size_t>(pcount), 0.0);
        std::vector<std::int64_t> sizes(static_cast<std::size_t>(pcount), 0);
        for (int j = 0; j < mu.count(); ++j) {
            int g = 0;
            if (j < static_cast<int>(population_of_.size()))
                g = population_of_[static_cast<std::size_t>(j)];
            else if (pcount > 1)
                throw DimensionError("cloud larger than the population labelling");
            out[static_cast<std::size_t>(g)] += mu.atom(j)[2];
            ++sizes[static_cast<std::size_t>(g)];
        }
        for (int g = 0; g < pcount; ++g) {
            if (sizes[static_cast<std::size_t>(g)] == 0)
                throw DomainError("population " + std::to_string(g) + " has no particles");
            out[static_cast<std::size_t>(g)] /= static_cast<double>(sizes[static_cast<std::size_t>(g)]);
        }
    }

    FhnParams params_;
    std::vector<int> population_of_;
};

}  // namespace mvsde
