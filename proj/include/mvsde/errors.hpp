#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvsde {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched particle counts / state dimensions between containers.
struct DimensionError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation (t < 0, N < 2, ...).
struct DomainError : Error {
    using Error::Error;
};

// Bad or missing user-facing configuration (config files, scheme parameters).
struct ConfigError : Error {
    using Error::Error;
};

// Operation not available for this model (e.g. pairwise-only interaction asked
// for separable statistics, Milstein without a correction operator).
struct UnsupportedError : Error {
    using Error::Error;
};

// Caller violated an internal protocol (e.g. clamp past the block end).
struct LogicError : Error {
    using Error::Error;
};

// A state became non-finite or left the trusted range during a simulation.
// Carries the first offending particle and the model time of the step.
struct DivergedError : Error {
    int particle;
    double time;
    DivergedError(int particle_, double time_, const std::string& what_)
        : Error(what_), particle(particle_), time(time_) {}
};

// Adaptive step function returned a non-positive step.
struct StepFunctionError : Error {
    using Error::Error;
};

// Filesystem / output failures in the experiment layer.
struct IoError : Error {
    using Error::Error;
};

}  // namespace mvsde
