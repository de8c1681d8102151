#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/probes.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/time_step.hpp"
#include "support.hpp"

using namespace mvsde;
using test_support::make_ex;

TEST_CASE("the deployed step follows delta * min(T, h) on hand inputs") {
    TimeStepFunction f = make_ex("ex2", 1).step;  // h(x) = min(1, |x|^-2)
    f.delta = 1.0 / 32.0;
    f.horizon = 1.0;

    const std::vector<double> far{2.0};    // h = 1/4, below the cap
    const std::vector<double> near{0.5};   // h capped at 1
    REQUIRE(h_delta(f, far) == 1.0 / 128.0);
    REQUIRE(h_delta(f, near) == 1.0 / 32.0);

    // The horizon caps a rule that proposes more time than remains.
    TimeStepFunction big;
    big.h = [](std::span<const double>) { return 5.0; };
    big.delta = 0.25;
    big.horizon = 2.0;
    REQUIRE(h_delta(big, near) == 0.5);
}

TEST_CASE("a vanishing rule is lifted to the floor instead of stalling") {
    TimeStepFunction f;
    f.h = [](std::span<const double>) { return 0.0; };
    f.delta = 0.5;
    const std::vector<double> x{1.0};
    REQUIRE(h_delta(f, x) == 0.5 * 1e-12);

    // A negative rule value (possible outside a model's admissible region)
    // is floored the same way.
    f.h = [](std::span<const double>) { return -3.0; };
    REQUIRE(h_delta(f, x) == 0.5 * 1e-12);
}

TEST_CASE("the neuron-network rule vanishes at the origin and gets floored") {
    const ExampleBundle ex4 = make_ex("ex4", 1);
    const std::vector<double> origin{0.0, 0.0, 0.0};
    // |x|^2 / |f(x)|^2 with a non-zero drift at the origin (the input current
    // alone keeps f(0) away from zero) is exactly zero.
    REQUIRE(ex4.step.h(origin) == 0.0);
    TimeStepFunction f = ex4.step;
    f.delta = 0.125;
    REQUIRE(h_delta(f, origin) == 0.125 * 1e-12);
}

TEST_CASE("non-finite states are rejected before the rule runs") {
    TimeStepFunction f = make_ex("ex2", 1).step;
    const std::vector<double> inf_state{std::numeric_limits<double>::infinity()};
    const std::vector<double> nan_state{std::nan("")};
    REQUIRE_THROWS_AS(h_delta(f, inf_state), DomainError);
    REQUIRE_THROWS_AS(h_delta(f, nan_state), DomainError);
}

TEST_CASE("halving delta halves the deployed step bit-exactly") {
    TimeStepFunction f = make_ex("ex5", 1).step;
    f.horizon = 1.0;
    SeedSpec spec;
    spec.master_seed = 99;
    CounterRng rng(spec);
    for (int s = 0; s < 200; ++s) {
        const std::vector<double> x{3.0 * rng.normal()};
        const double base = h_delta(f.with_delta(1.0), x);
        REQUIRE(h_delta(f.with_delta(0.5), x) == std::ldexp(base, -1));
        REQUIRE(h_delta(f.with_delta(1.0 / 64.0), x) == std::ldexp(base, -6));
    }
}

TEST_CASE("with_delta changes only the mesh parameter") {
    TimeStepFunction f = make_ex("ex2", 1).step;
    f.horizon = 4.0;
    f.floor = 1e-10;
    const TimeStepFunction g = f.with_delta(0.25);
    REQUIRE(g.delta == 0.25);
    REQUIRE(g.horizon == 4.0);
    REQUIRE(g.floor == 1e-10);
    REQUIRE(g.lower_law.has_value());
    REQUIRE(g.lower_law->a == f.lower_law->a);
    REQUIRE(g.lower_law->b == f.lower_law->b);
    REQUIRE(g.lower_law->c == f.lower_law->c);
    const std::vector<double> x{2.0};
    REQUIRE(g.h(x) == f.h(x));
}

TEST_CASE("every example's deployed step stays inside the admissible band") {
    // With the floored rule h~ = max(h, floor), the envelope must satisfy
    // delta * min(T, h~) <= h_delta(x) <= min(delta T, h~) at every state.
    const double T = 1.0;
    for (const char* name : {"ex1", "ex2", "ex3", "ex4", "ex5"}) {
        const ExampleBundle ex = make_ex(name, 4);
        const int d = name == std::string("ex4") ? 3 : 1;
        SeedSpec spec;
        spec.master_seed = 1000003;
        spec.channel = kProbeChannel;
        CounterRng rng(spec);
        for (const double delta : {1.0, 0.125, 1.0 / 256.0}) {
            TimeStepFunction f = ex.step;
            f.delta = delta;
            f.horizon = T;
            long long violations = 0;
            std::vector<double> x(static_cast<std::size_t>(d));
            for (int s = 0; s < 10000; ++s) {
                for (auto& v : x) v = 3.0 * rng.normal();  // roams outside unit balls too
                const double lifted = std::max(f.h(x), f.floor);
                const double lo = delta * std::min(T, lifted);
                const double hi = std::min(delta * T, lifted);
                const double hd = h_delta(f, x);
                if (!(hd >= lo && hd <= hi)) ++violations;
            }
            INFO(name << " delta=" << delta);
            REQUIRE(violations == 0);
        }
    }
}

TEST_CASE("block clamping truncates to the boundary and guards misuse") {
    REQUIRE(clamp_step(0.5, 0.9, 1.0) == Catch::Approx(0.1));
    REQUIRE(clamp_step(0.05, 0.9, 1.0) == 0.05);
    REQUIRE_THROWS_AS(clamp_step(0.1, 1.0, 1.0), LogicError);
    REQUIRE_THROWS_AS(clamp_step(0.1, 1.5, 1.0), LogicError);
}

TEST_CASE("the growth-compatibility probe clears rules built for their drifts") {
    for (const char* name : {"ex2", "ex5"}) {
        const ExampleBundle ex = make_ex(name, 4);
        TimeStepFunction f = ex.step;
        f.delta = 1.0 / 32.0;
        f.horizon = 1.0;
        const ProbeReport r =
            probe_monotone_step_condition(*ex.model, f, 0.5, 10000, 1000.0, 1000003, 600);
        INFO(name);
        REQUIRE(r.check == "monotone_step_condition");
        REQUIRE(r.samples == 10000);
        REQUIRE(r.fitted);
        REQUIRE(r.violation_count == 0);
        REQUIRE(r.passed());
    }
}

TEST_CASE("the probe has the power to catch a genuinely failing exponent") {
    // For the quartic-decay rule against a quintic drift, the 3/2-weighted
    // variant of the growth condition fails at large |x|: the h |b|^2 term
    // contributes ~1.5 |x|^6 while <x, b> only supplies -|x|^6. The probe
    // must report counterexamples, not absolve them.
    const ExampleBundle ex5 = make_ex("ex5", 4);
    TimeStepFunction f = ex5.step;
    f.delta = 1.0 / 32.0;
    f.horizon = 1.0;
    const ProbeReport bad =
        probe_monotone_step_condition(*ex5.model, f, 1.5, 10000, 1000.0, 1000003, 600);
    REQUIRE(bad.violation_count > 0);
    REQUIRE_FALSE(bad.passed());
    REQUIRE_FALSE(bad.examples.empty());
    REQUIRE(bad.examples.size() <= 8);
    for (const ProbeViolation& v : bad.examples) REQUIRE(v.lhs > v.rhs);
}

TEST_CASE("declared lower-bound laws hold for the rules that declare them") {
    for (const char* name : {"ex2", "ex3", "ex5"}) {
        const ExampleBundle ex = make_ex(name, 4);
        TimeStepFunction f = ex.step;
        f.delta = 1.0 / 32.0;
        f.horizon = 1.0;
        const ProbeReport r = probe_lower_bound_law(f, 1, 10000, 1000.0, 1000003, 600);
        INFO(name);
        REQUIRE(r.check == "lower_bound_law");
        REQUIRE(r.violation_count == 0);
    }
}

TEST_CASE("probing a lower bound that was never declared is a config error") {
    const ExampleBundle ex1 = make_ex("ex1", 4);
    REQUIRE_FALSE(ex1.step.lower_law.has_value());
    REQUIRE_THROWS_AS(probe_lower_bound_law(ex1.step, 1, 100, 0.9), ConfigError);
}

TEST_CASE("the diffusion-growth ceiling holds with the derived exponents") {
    // h = min(1, |x|^-2) fits under 2 / (1 + |x|^2), i.e. 3q = 2;
    // h = min(1, |x|^-4) fits under 2 / (1 + |x|^4), i.e. 3q = 4.
    const ExampleBundle ex2 = make_ex("ex2", 4);
    const ExampleBundle ex5 = make_ex("ex5", 4);
    REQUIRE(probe_superlinear_diffusion_bound(ex2.step, 1, 2.0 / 3.0, 2.0, 10000, 1000.0, 1000003,
                                              600)
                .violation_count == 0);
    REQUIRE(probe_superlinear_diffusion_bound(ex5.step, 1, 4.0 / 3.0, 2.0, 10000, 1000.0, 1000003,
                                              600)
                .violation_count == 0);
    // A ceiling below the rule's cap is caught immediately (the first probe
    // state is the origin, where h = 1 > 1/2).
    const ProbeReport tight = probe_superlinear_diffusion_bound(ex2.step, 1, 2.0 / 3.0, 0.5, 100,
                                                                1000.0, 1000003, 600);
    REQUIRE(tight.check == "superlinear_diffusion_bound");
    REQUIRE(tight.violation_count > 0);
}
