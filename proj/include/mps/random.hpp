#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mps {

/// 64-bit Mersenne Twister; its output sequence is fixed by the standard.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the substream identified by `key` under a parent `seed`.
/// Substreams for distinct keys are statistically independent.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t key) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(key + 0x2545f4914f6cdd1dULL));
}

inline Rng make_substream(std::uint64_t seed, std::uint64_t key) {
    return Rng{substream_seed(seed, key)};
}

// The <random> distributions are implementation-defined; the helpers below
// keep generated data identical across standard libraries.

/// Uniform double on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Unbiased integer on [0, n) by rejection. `n` must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - Rng::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

/// Standard normal draw (Marsaglia polar method, one value per call).
inline double standard_normal(Rng& rng) {
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * uniform01(rng) - 1.0;
        v = 2.0 * uniform01(rng) - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace mps
