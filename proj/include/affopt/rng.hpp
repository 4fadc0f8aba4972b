#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace affopt {

// Seeded generator used everywhere. std::mt19937_64 is the engine; the
// distribution helpers below avoid std::uniform_*_distribution, whose output
// is implementation-defined, so streams are identical across compilers.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Derive an independent child stream (worker i from a root seed).
inline Rng split_rng(std::uint64_t root_seed, std::uint64_t stream) {
    return Rng(root_seed * 0x9e3779b97f4a7c15ULL + stream + 1ULL);
}

// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection-free multiply-shift would bias for
// huge n; n here is always small, so 128-bit multiply is exact enough and
// identical everywhere.
inline int uniform_int(Rng& rng, int n) {
    return static_cast<int>((static_cast<__uint128_t>(rng()) *
                             static_cast<__uint128_t>(n)) >> 64);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// Index drawn from unnormalized nonnegative weights.
inline int categorical(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace affopt
