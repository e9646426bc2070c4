// rng.h
// Deterministic seed derivation. Every stochastic component draws from a
// substream derived from (global seed, tag, indices) so that parallel or
// reordered execution reproduces the sequential result.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pcgl::substrate {

// FNV-1a over the tag, then splitmix64 finalization over seed and indices.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    };
    h = mix(h ^ mix(seed));
    h = mix(h ^ mix(a));
    h = mix(h ^ mix(b));
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
    return std::mt19937_64(mix_seed(seed, tag, a, b));
}

}  // namespace pcgl::substrate
