#pragma once
// Deterministic randomness helpers.  Every stochastic routine in the toolkit
// takes either an explicit seed or an Rng&; nothing reads ambient entropy.

#include <cstdint>
#include <random>

namespace hvacft {

using Rng = std::mt19937_64;

// Derives an independent stream from (seed, salt).  splitmix64 finalizer --
// decorrelates nearby seeds/salts so sweep points and modules never share a
// stream by accident.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t salt = 0) {
    return Rng(derive_seed(seed, salt));
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean, double std) {
    return std::normal_distribution<double>(mean, std)(rng);
}

// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

// FNV-1a over bytes; used for config/checkpoint hashes in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace hvacft
