#pragma once

#include <cmath>
#include <cstdint>

namespace ordef {

// Counter-based splittable generator: every draw is a pure hash of
// (seed, stream, index_a, index_b), so streams can be consumed in any order
// and in parallel without changing results.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_counter(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(stream));
    h = splitmix64(h ^ splitmix64(a));
    h = splitmix64(h ^ splitmix64(b));
    return h;
}

// Uniform draw in the open interval (0, 1).
inline double uniform01(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = hash_counter(seed, stream, a, b);
    return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

inline double unit_exponential(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t a, std::uint64_t b) {
    return -std::log(uniform01(seed, stream, a, b));
}

// Stream tags used across the engine.
inline constexpr std::uint64_t kStreamMarks = 1;
inline constexpr std::uint64_t kStreamFactor = 2;
inline constexpr std::uint64_t kStreamConfig = 3;

}  // namespace ordef
