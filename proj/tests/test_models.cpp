#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/fhn.hpp"
#include "mvsde/initial_law.hpp"
#include "mvsde/models.hpp"
#include "mvsde/rng.hpp"
#include "support.hpp"

using namespace mvsde;
using test_support::fhn_params;
using test_support::make_ex;

namespace {

ParticleCloud random_cloud(int count, int dim, std::uint64_t seed) {
    ParticleCloud cloud(count, dim);
    SeedSpec s;
    s.master_seed = seed;
    CounterRng rng(s);
    for (auto& v : cloud.states) v = rng.normal();
    return cloud;
}

// The direct O(N)-per-call route is the oracle for the cached route.
void check_routes(const McKeanVlasovModel& model, int count, double tol, std::uint64_t seed) {
    const int d = model.dim_state();
    const int k = model.dim_noise();
    const ParticleCloud cloud = random_cloud(count, d, seed);
    const EmpiricalMeasure mu = EmpiricalMeasure::of(cloud);
    InteractionCache cache;
    model.measure_statistics(mu, cache);

    std::vector<double> b_direct(static_cast<std::size_t>(d)), b_cached(static_cast<std::size_t>(d));
    std::vector<double> s_direct(static_cast<std::size_t>(d) * static_cast<std::size_t>(k));
    std::vector<double> s_cached(s_direct.size());
    for (int i = 0; i < count; ++i) {
        model.drift(0.25, i, cloud.state(i), mu, b_direct);
        model.drift_cached(0.25, i, cloud.state(i), cache, b_cached);
        model.diffusion(0.25, i, cloud.state(i), mu, s_direct);
        model.diffusion_cached(0.25, i, cloud.state(i), cache, s_cached);
        for (int m = 0; m < d; ++m) {
            if (tol == 0.0) {
                REQUIRE(b_direct[static_cast<std::size_t>(m)] == b_cached[static_cast<std::size_t>(m)]);
            } else {
                REQUIRE(std::abs(b_direct[static_cast<std::size_t>(m)] -
                                 b_cached[static_cast<std::size_t>(m)]) <= tol);
            }
        }
        for (std::size_t e = 0; e < s_direct.size(); ++e) {
            if (tol == 0.0) {
                REQUIRE(s_direct[e] == s_cached[e]);
            } else {
                REQUIRE(std::abs(s_direct[e] - s_cached[e]) <= tol);
            }
        }
    }
}

}  // namespace

TEST_CASE("cached interaction routes agree with the direct oracle") {
    for (int count : {1, 2, 7, 64}) {
        INFO("count=" << count);
        check_routes(*make_ex("ex1", count).model, count, 0.0, 11);
        check_routes(*make_ex("ex2", count).model, count, 0.0, 22);
        check_routes(*make_ex("ex5", count).model, count, 0.0, 33);
        check_routes(*make_ex("ex4", count).model, count, 0.0, 44);
        // The sine kernel is split through an angle identity in the cached
        // route, so the two routes differ by rounding only.
        check_routes(*make_ex("ex3", count).model, count, 1e-12, 55);
    }
}

TEST_CASE("ball-confined drift matches its closed form and projects back") {
    const BallConfinedMeanField model;
    std::vector<double> atoms{0.2, 0.4};
    const EmpiricalMeasure mu(atoms.data(), 2, 1);
    std::vector<double> x{0.5}, out{0.0};
    model.drift(0.0, 0, x, mu, out);
    REQUIRE(out[0] == -0.5 / (1.0 - 0.25) + (0.2 + 0.4) / 2.0);
    model.diffusion(0.0, 0, x, mu, out);
    REQUIRE(out[0] == 1.0);

    std::vector<double> escaped{1.5};
    model.post_step_hook(escaped);
    REQUIRE(escaped[0] == BallConfinedMeanField::kRadiusMax);
    std::vector<double> negative{-2.0};
    model.post_step_hook(negative);
    REQUIRE(negative[0] == -BallConfinedMeanField::kRadiusMax);
    std::vector<double> inside{0.3};
    model.post_step_hook(inside);
    REQUIRE(inside[0] == 0.3);
}

TEST_CASE("mean-coupled double-well drift matches its closed form") {
    const GinzburgLandauMeanField model(1.5, 0.5);
    std::vector<double> atoms{1.0, 3.0};
    const EmpiricalMeasure mu(atoms.data(), 2, 1);
    std::vector<double> x{2.0}, out{0.0};
    model.drift(0.0, 0, x, mu, out);
    REQUIRE(out[0] == 0.5 * 1.5 * 1.5 * 2.0 - 8.0 + 0.5 * 2.0);
    model.diffusion(0.0, 0, x, mu, out);
    REQUIRE(out[0] == 1.5 * 2.0);
    REQUIRE_FALSE(model.has_milstein_correction());
    std::vector<double> dummy(1);
    REQUIRE_THROWS_AS(model.milstein_correction(x, dummy), UnsupportedError);
}

TEST_CASE("oscillator drift carries the frozen intrinsic rate per particle") {
    const KuramotoCubic model(2.0, {0.5, -0.25});
    std::vector<double> atoms{0.3, 0.3};
    const EmpiricalMeasure mu(atoms.data(), 2, 1);
    std::vector<double> x{0.3}, out{0.0};
    model.drift(0.0, 0, x, mu, out);
    REQUIRE(out[0] == Catch::Approx(0.5 + 0.3 - 0.027).margin(1e-15));
    model.drift(0.0, 1, x, mu, out);
    REQUIRE(out[0] == Catch::Approx(-0.25 + 0.3 - 0.027).margin(1e-15));
    model.diffusion(0.0, 0, x, mu, out);
    REQUIRE(out[0] == 2.0);

    // A particle index beyond the built-for size names both in the error.
    using Catch::Matchers::ContainsSubstring;
    REQUIRE_THROWS_MATCHES(model.drift(0.0, 2, x, mu, out), DomainError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("2")));
    REQUIRE_THROWS_AS(model.drift(0.0, -1, x, mu, out), DomainError);
    REQUIRE_THROWS_AS(KuramotoCubic(1.0, {}), DomainError);
}

TEST_CASE("quintic model exposes the geometric-noise correction operator") {
    const QuinticInteractingGBM model;
    std::vector<double> atoms{0.5};
    const EmpiricalMeasure mu(atoms.data(), 1, 1);
    std::vector<double> x{1.2}, out{0.0};
    model.drift(0.0, 0, x, mu, out);
    const double x2 = 1.2 * 1.2;
    REQUIRE(out[0] == -x2 * x2 * 1.2 + 0.5);
    model.diffusion(0.0, 0, x, mu, out);
    REQUIRE(out[0] == 1.2);
    REQUIRE(model.has_milstein_correction());
    model.milstein_correction(x, out);
    REQUIRE(out[0] == 1.2);  // sigma sigma' = x for sigma(x) = x
}

TEST_CASE("intrinsic rates are reproducible and nested across system sizes") {
    const auto small = make_ex("ex3", 4, 1000003, 9);
    const auto large = make_ex("ex3", 8, 1000003, 9);
    const auto& eta_small = dynamic_cast<const KuramotoCubic&>(*small.model).intrinsic_rates();
    const auto& eta_large = dynamic_cast<const KuramotoCubic&>(*large.model).intrinsic_rates();
    REQUIRE(eta_small.size() == 4);
    REQUIRE(eta_large.size() == 8);
    for (int i = 0; i < 4; ++i)
        REQUIRE(eta_small[static_cast<std::size_t>(i)] == eta_large[static_cast<std::size_t>(i)]);

    const auto again = make_ex("ex3", 4, 1000003, 9);
    REQUIRE(dynamic_cast<const KuramotoCubic&>(*again.model).intrinsic_rates() == eta_small);
    const auto other = make_ex("ex3", 4, 1000003, 10);
    REQUIRE(dynamic_cast<const KuramotoCubic&>(*other.model).intrinsic_rates() != eta_small);
}

TEST_CASE("sigmoid, bump, and gate noise match hand values") {
    const FhnParams params = FhnParams::from_config(fhn_params().section("fhn"));
    const FhnPopulationParams& p = params.pops[0];

    REQUIRE(fhn_sigmoid(p, 0.0) == 1.0 / (1.0 + std::exp(0.4)));
    REQUIRE(fhn_sigmoid(p, 2.0) == 0.5);  // V = V_T sits at the half-height

    REQUIRE(fhn_channel_bump(p, 0.5) == 0.1 * std::exp(-0.5));
    REQUIRE(fhn_channel_bump(p, 0.0) == 0.0);
    REQUIRE(fhn_channel_bump(p, 1.0) == 0.0);
    REQUIRE(fhn_channel_bump(p, -0.2) == 0.0);
    REQUIRE(fhn_channel_bump(p, 1.3) == 0.0);

    // Outside the open unit interval the noise is dead exactly.
    REQUIRE(fhn_gate_noise(p, 0.0, 0.0) == 0.0);
    REQUIRE(fhn_gate_noise(p, 0.0, 1.0) == 0.0);
    REQUIRE(fhn_gate_noise(p, 5.0, -3.0) == 0.0);
    const double mid = fhn_gate_noise(p, 0.0, 0.5);
    const double arg = p.a_r * fhn_sigmoid(p, 0.0) * 0.5 + p.a_d * 0.5;
    REQUIRE(mid == std::sqrt(arg) * fhn_channel_bump(p, 0.5));

    // A hostile parameter set that drives the square-root argument negative
    // must truncate to zero rather than produce a NaN.
    FhnPopulationParams hostile = p;
    hostile.a_d = -2.0;
    const double clamped = fhn_gate_noise(hostile, 0.0, 0.9);
    REQUIRE(std::isfinite(clamped));
    REQUIRE(clamped == 0.0);
}

TEST_CASE("neuron drift and diffusion match their closed forms at the origin") {
    const FhnParams params = FhnParams::from_config(fhn_params().section("fhn"));
    const FhnPopulationParams& p = params.pops[0];
    const std::vector<double> x{0.0, 0.0, 0.0};
    const std::vector<double> mean_y{0.25};
    std::vector<double> b(3);
    fhn_drift(0.0, x, mean_y, params, 0, b);
    REQUIRE(b[0] == p.I + 1.0 * 1.0 * 0.25);  // -J(0 - V_rev) meanY
    REQUIRE(b[1] == p.c * p.a);
    REQUIRE(b[2] == p.a_r * fhn_sigmoid(p, 0.0));

    // Recovery of the gating variable at its ceiling.
    const std::vector<double> gated{0.0, 0.0, 1.0};
    fhn_drift(0.0, gated, mean_y, params, 0, b);
    REQUIRE(b[2] == -p.a_d);

    std::vector<double> sigma(9, -1.0);
    fhn_diffusion(0.0, x, mean_y, params, 0, sigma);
    REQUIRE(sigma[0] == p.sigma_ext);                       // V row, external channel
    REQUIRE(sigma[2] == -0.2 * (0.0 - 1.0) * 0.25);         // V row, synaptic channel
    REQUIRE(sigma[7] == fhn_gate_noise(p, 0.0, 0.0));       // y row, gating channel
    for (std::size_t e : {1u, 3u, 4u, 5u, 6u, 8u}) REQUIRE(sigma[e] == 0.0);
}

TEST_CASE("network parameters must be complete; every gap is named at once") {
    ParamTable t = fhn_params().section("fhn");
    t.erase("a_r");
    t.erase("V_rev");
    using Catch::Matchers::ContainsSubstring;
    REQUIRE_THROWS_MATCHES(
        FhnParams::from_config(t), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("a_r") && ContainsSubstring("V_rev")));

    ParamTable bad_gamma = fhn_params().section("fhn");
    bad_gamma.set("step_gamma", ConfigValue::of_real(0.0));
    REQUIRE_THROWS_AS(FhnParams::from_config(bad_gamma), ConfigError);
}

TEST_CASE("scalar network constants broadcast across populations") {
    ParamTable t = fhn_params().section("fhn");
    t.set("populations", ConfigValue::of_int(3));
    const FhnParams params = FhnParams::from_config(t);
    REQUIRE(params.population_count() == 3);
    REQUIRE(params.j_bar.size() == 9);
    REQUIRE(params.v_rev.size() == 9);
    REQUIRE(params.sigma_j.size() == 9);
    for (int alpha = 0; alpha < 3; ++alpha)
        for (int gamma = 0; gamma < 3; ++gamma) {
            REQUIRE(params.coupling(params.j_bar, alpha, gamma) == 1.0);
            REQUIRE(params.coupling(params.sigma_j, alpha, gamma) == 0.2);
        }
    REQUIRE(params.pops[2].I == 0.5);
}

TEST_CASE("the network validates population labels and sizes") {
    const FhnParams params = FhnParams::from_config(fhn_params().section("fhn"));
    REQUIRE_THROWS_AS(FitzHughNagumoNetwork(params, {0, 1}), DomainError);  // only 1 population

    ParamTable two = fhn_params().section("fhn");
    two.set("populations", ConfigValue::of_int(2));
    const FhnParams params2 = FhnParams::from_config(two);
    const FitzHughNagumoNetwork net(params2, {0, 1});
    REQUIRE(net.dim_noise() == 4);  // external + gating + one channel per population

    // A cloud outgrowing the labelling is a hard error for multi-population
    // networks rather than a silent misattribution.
    const ParticleCloud big = random_cloud(3, 3, 7);
    std::vector<double> out(3);
    REQUIRE_THROWS_AS(net.drift(0.0, 0, big.state(0), EmpiricalMeasure::of(big), out),
                      DimensionError);

    // An empty population has no mean to offer.
    const FitzHughNagumoNetwork lopsided(params2, {1, 1});
    const ParticleCloud pair = random_cloud(2, 3, 8);
    REQUIRE_THROWS_AS(lopsided.drift(0.0, 0, pair.state(0), EmpiricalMeasure::of(pair), out),
                      DomainError);
}

TEST_CASE("example builder wires populations into contiguous blocks") {
    const ExampleBundle ex4 = make_ex("ex4", 5);
    const auto& net = dynamic_cast<const FitzHughNagumoNetwork&>(*ex4.model);
    for (int i = 0; i < 5; ++i) REQUIRE(net.population_label(i) == 0);
    REQUIRE(net.dim_noise() == 3);
    REQUIRE(net.dim_state() == 3);
}

TEST_CASE("the neuron initial law clamps the gating coordinate into [0, 1]") {
    const ExampleBundle ex4 = make_ex("ex4", 500, 1000003, 3);
    REQUIRE(ex4.initial.kind == InitialLaw::Kind::normal);
    const ParticleCloud cloud = draw_initial_cloud(ex4.initial, 500, 1000003, 3);
    for (int i = 0; i < 500; ++i) {
        REQUIRE(cloud.state(i)[2] >= 0.0);
        REQUIRE(cloud.state(i)[2] <= 1.0);
    }
}

TEST_CASE("example builder reports unknown names and missing initialisation") {
    REQUIRE_THROWS_AS(make_ex("ex9", 4), ConfigError);
    REQUIRE_THROWS_AS(make_example("ex1", ParamTable{}, 0, 1, 1), DomainError);

    ParamTable broken = fhn_params();
    broken.erase("fhn.v0_mean");
    broken.erase("fhn.y0_sd");
    using Catch::Matchers::ContainsSubstring;
    REQUIRE_THROWS_MATCHES(make_example("ex4", broken, 4, 1, 1), ConfigError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("v0_mean") &&
                                                           ContainsSubstring("y0_sd")));
}

TEST_CASE("pairwise-only defaults refuse the cached route") {
    // A minimal model that never implements the separable hooks.
    struct PairwiseOnly final : McKeanVlasovModel {
        int dim_state() const override { return 1; }
        int dim_noise() const override { return 1; }
        InteractionKind interaction_kind() const override { return InteractionKind::pairwise; }
        void drift(double, int, std::span<const double>, const EmpiricalMeasure&,
                   std::span<double> out) const override {
            out[0] = 0.0;
        }
        void diffusion(double, int, std::span<const double>, const EmpiricalMeasure&,
                       std::span<double> out) const override {
            out[0] = 1.0;
        }
    };
    const PairwiseOnly model;
    InteractionCache cache;
    const std::vector<double> atoms{0.0};
    const EmpiricalMeasure mu(atoms.data(), 1, 1);
    std::vector<double> out(1);
    REQUIRE_THROWS_AS(model.measure_statistics(mu, cache), UnsupportedError);
    REQUIRE_THROWS_AS(model.drift_cached(0.0, 0, atoms, cache, out), UnsupportedError);
    REQUIRE_THROWS_AS(model.diffusion_cached(0.0, 0, atoms, cache, out), UnsupportedError);
}
