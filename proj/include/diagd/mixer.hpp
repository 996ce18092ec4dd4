#pragma once

#include "diagd/grid.hpp"

#include <cstdint>
#include <initializer_list>

namespace diagd
{

// SplitMix64 finalizer (Stafford variant 13). Full avalanche on 64 bits.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Order-sensitive fold of words into one hash.
[[nodiscard]] constexpr std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words) noexcept
{
    std::uint64_t h = mix64(seed + kGolden);
    for (auto w : words)
    {
        h = mix64(h ^ mix64(w + kGolden));
    }
    return h;
}

// Top 53 bits mapped to [0, 1).
[[nodiscard]] constexpr double to_unit(std::uint64_t h) noexcept
{
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Domain tags keep the per-purpose streams disjoint.
inline constexpr std::uint64_t kSampleStreamTag = 0x73616d706c650001ULL;
inline constexpr std::uint64_t kLocalFieldTag = 0x6c6f63616c660002ULL;
inline constexpr std::uint64_t kPromptTag = 0x70726f6d70740003ULL;

// Uniform draw in [0, 1) for coordinate c. Independent of when c is decoded.
[[nodiscard]] constexpr double sample_stream(std::uint64_t seed, Coordinate const& c) noexcept
{
    return to_unit(hash_words(seed,
        {kSampleStreamTag, static_cast<std::uint64_t>(static_cast<std::int64_t>(c.frame)),
            static_cast<std::uint64_t>(c.row), static_cast<std::uint64_t>(c.col)}));
}

} // namespace diagd
