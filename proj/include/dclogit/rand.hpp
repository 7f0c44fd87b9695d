#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dclogit::rng {

// splitmix64; used to derive independent substreams from one seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic substream seed for (seed, index) pairs.
inline uint64_t substream(uint64_t seed, uint64_t index) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    splitmix64(s);
    return splitmix64(s);
}

// Uniform in [0, 1) built from the top 53 bits; avoids the
// implementation-defined behaviour of std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline uint64_t below(std::mt19937_64& g, uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do { x = g(); } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[below(g, i)]);
}

} // namespace dclogit::rng
