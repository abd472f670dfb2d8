#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "scn/types.hpp"

namespace scn {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes a list of integers into one seed. Order matters.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts)
        h = splitmix64(h ^ splitmix64(p));
    return h;
}

inline Vec standard_normal(Rng& rng, Eigen::Index n)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out[i] = dist(rng);
    return out;
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace scn
