#pragma once

#include <cstdint>
#include <random>

namespace ifr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seed of stream `index` derived from `root`; streams with different indices are
// independent for practical purposes and do not depend on scheduling.
inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
    return splitmix64(splitmix64(root) ^ splitmix64(index * 0xD1B54A32D192ED03ULL + 1));
}

inline Rng make_stream(std::uint64_t root, std::uint64_t index) {
    return Rng(stream_seed(root, index));
}

// Fixed stream labels so that different consumers of one root seed never collide.
namespace streams {
inline constexpr std::uint64_t directions = 1;
inline constexpr std::uint64_t bootstrap = 2;
inline constexpr std::uint64_t study = 3;
inline constexpr std::uint64_t data = 4;
inline constexpr std::uint64_t restarts = 5;
} // namespace streams

} // namespace ifr
