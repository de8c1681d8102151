#pragma once

// Shared fixtures for the test suites: a self-contained neuron-network
// parameter set (mirroring configs/fhn_defaults.toml) and a one-call example
// builder so tests never depend on the working directory.

#include <cstdint>
#include <string>

#include "mvsde/config.hpp"
#include "mvsde/example_factory.hpp"

namespace test_support {

inline const char* kFhnParamText = R"(
[fhn]
a = 0.7
b = 0.8
c = 0.08
I = 0.5
a_r = 1.0
a_d = 1.0
T_max = 1.0
lambda = 0.2
V_T = 2.0
Gamma = 0.1
Lambda = 0.5
J_bar = 1.0
V_rev = 1.0
sigma_ext = 0.5
sigma_J = 0.2
step_gamma = 1.0
populations = 1
v0_mean = 0.0
v0_sd = 2.0
w0_mean = 0.5
w0_sd = 0.5
y0_mean = 0.3
y0_sd = 0.1
)";

inline mvsde::ParamTable fhn_params() { return mvsde::parse_config_text(kFhnParamText); }

inline mvsde::ExampleBundle make_ex(const std::string& name, int count,
                                    std::uint64_t master_seed = 1000003,
                                    std::uint32_t experiment = 0) {
    mvsde::ParamTable params;
    if (name == "ex4") params = fhn_params();
    return mvsde::make_example(name, params, count, master_seed, experiment);
}

}  // namespace test_support
