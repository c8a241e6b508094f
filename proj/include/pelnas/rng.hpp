#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

namespace pelnas {

// mt19937_64 output is fixed by the standard; the distribution helpers below
// replace std::uniform_*_distribution / std::normal_distribution, whose
// output differs between standard library implementations.
using Rng = std::mt19937_64;

constexpr auto splitmix64(std::uint64_t x) noexcept -> std::uint64_t
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

/// Seed for an independent stream identified by (seed, stream).
constexpr auto derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept -> std::uint64_t
{
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

constexpr auto fnv1a64(std::string_view s) noexcept -> std::uint64_t
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Uniform integer in [0, n). n must be positive.
inline auto uniform_index(Rng& rng, std::size_t n) -> std::size_t
{
    auto const bound = static_cast<std::uint64_t>(n);
    auto const limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

/// Uniform double in [0, 1) with 53 random bits.
inline auto uniform_unit(Rng& rng) -> double
{
    return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

inline auto bernoulli(Rng& rng, double p) -> bool
{
    return uniform_unit(rng) < p;
}

/// Standard normal deviate (Box-Muller, one value per call).
inline auto standard_normal(Rng& rng) -> double
{
    double u1 = 0.0;
    do {
        u1 = uniform_unit(rng);
    } while (u1 <= 0.0);
    double const u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <class Container>
void shuffle(Container& c, Rng& rng)
{
    for (std::size_t i = c.size(); i > 1; --i) {
        auto j = uniform_index(rng, i);
        using std::swap;
        swap(c[i - 1], c[j]);
    }
}

} // namespace pelnas
