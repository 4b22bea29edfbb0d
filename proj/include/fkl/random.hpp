#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fkl {

// All randomness flows through mt19937_64 plus the explicit transforms
// below.  std::uniform_real_distribution and friends are implementation
// defined, so using them would break bit-for-bit reproducibility of
// serialized artifacts across standard libraries.

/// Uniform draw in [0, 1) with 53 random bits, one engine call.
inline double uniform_unit(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, bound) by rejection.  bound must be positive.
inline std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine();
    } while (x >= limit);
    return x % bound;
}

/// Standard normal via Box-Muller.  Consumes two engine calls per draw;
/// the cosine twin is discarded to keep the stream position predictable.
inline double standard_normal(std::mt19937_64& engine) {
    const double u1 = 1.0 - uniform_unit(engine);  // (0, 1], keeps log finite
    const double u2 = uniform_unit(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fkl
