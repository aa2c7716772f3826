#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace prosody {

// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so seeded outputs would differ between standard libraries. These helpers
// only rely on the fully specified mt19937_64 engine.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    // rejection sampling over the largest multiple of n
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = rng();
    while (x >= limit)
        x = rng();
    return x % n;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s, std::uint64_t h = 1469598103934665603ull)
{
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline Rng seeded_rng(std::uint64_t seed, std::string_view salt = {})
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stable_hash(salt)),
                      static_cast<std::uint32_t>(stable_hash(salt) >> 32)};
    return Rng(seq);
}

} // namespace prosody
