#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "mvsde/errors.hpp"

namespace mvsde {

// Identifies one random stream. Streams with distinct (experiment, particle,
// channel) triples are independent for a fixed master_seed; the same spec
// always reproduces the same draws, regardless of thread count or platform
// scheduling, because the generator is counter based.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint32_t experiment = 0;  // < 2^24
    std::uint32_t particle = 0;
    std::uint32_t channel = 0;  // < 2^8
};

// Reserved channel ids. Channels 0..dim_noise-1 belong to the Brownian path.
inline constexpr std::uint32_t kInitialLawChannel = 250;
inline constexpr std::uint32_t kModelIntrinsicChannel = 251;  // e.g. Kuramoto frequencies
inline constexpr std::uint32_t kProbeChannel = 252;

namespace detail {

// Philox 4x32-10 block cipher (Salmon et al., SC'11). The 128-bit counter
// carries (position, stream id); the 64-bit key carries the master seed.
inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

}  // namespace detail

// Counter-based stream: buffers one Philox block (4 x 32 bits) at a time.
// uniform01() maps 64 bits to (0, 1]; normal() is a Box-Muller pair with a
// cached second value, so the uniform consumption per draw is fixed.
class CounterRng {
public:
    explicit CounterRng(const SeedSpec& spec) {
        if (spec.experiment >= (1u << 24))
            throw DomainError("SeedSpec.experiment must be < 2^24");
        if (spec.channel >= (1u << 8)) throw DomainError("SeedSpec.channel must be < 2^8");
        key_ = {static_cast<std::uint32_t>(spec.master_seed),
                static_cast<std::uint32_t>(spec.master_seed >> 32)};
        stream_ = {spec.particle, (spec.experiment << 8) | spec.channel};
        pos_ = 0;
        buf_pos_ = 4;
        has_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) {
            buf_ = detail::philox4x32({static_cast<std::uint32_t>(pos_),
                                       static_cast<std::uint32_t>(pos_ >> 32), stream_[0],
                                       stream_[1]},
                                      key_);
            ++pos_;
            buf_pos_ = 0;
        }
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on (0, 1]: (x >> 11) + 1 over 2^53, safe for log().
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
    }

    // Uniform on [0, 1).
    double uniform01_halfopen() {
        return static_cast<double>(next_u64() >> 11) * 0x1p-53;
    }

    double normal() {
        if (has_cached_normal_) {
            has_cached_normal_ = false;
            return cached_normal_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(a);
        has_cached_normal_ = true;
        return r * std::cos(a);
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> stream_;
    std::uint64_t pos_;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_;
    double cached_normal_;
    bool has_cached_normal_;
};

}  // namespace mvsde
