#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random streams: every (seed, stream, index) triple maps to a
// fixed 64-bit word, so draws can be evaluated in any order (and from any
// thread) with identical results. This is what makes parallel bootstrap
// draws and Monte Carlo replications reproducible from a single seed.

namespace kinkreg::rng {

// splitmix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t word(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
    std::uint64_t h = mix64(seed ^ 0x853c49e6748fea9bULL);
    h = mix64(h ^ stream * 0xda942042e4dd58b5ULL);
    h = mix64(h ^ index * 0x2545f4914f6cdd1dULL);
    return h;
}

// Uniform on (0, 1]; never 0, so log() is safe.
inline double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    return static_cast<double>((word(seed, stream, index) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal, one value per (seed, stream, index), via Box-Muller.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    const double u1 = uniform01(seed, stream, 2 * index);
    const double u2 = uniform01(seed, stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sign in {-1, +1} with equal probability.
inline double rademacher(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    return (word(seed, stream, index) & 1ULL) ? 1.0 : -1.0;
}

// Child seed for a nested run (e.g. one Monte Carlo replication).
inline constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                                      std::uint64_t b = 0) noexcept {
    return word(seed, a, b);
}

} // namespace kinkreg::rng
