#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dflsim {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tag path,
// e.g. derive_seed(master, {stream::train, node, round}).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t h = mix64(base);
    for (auto t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
    return h;
}

namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t topology = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t train = 4;
inline constexpr std::uint64_t poison = 5;
inline constexpr std::uint64_t split = 6;
inline constexpr std::uint64_t targeting = 7;
}  // namespace stream

}  // namespace dflsim
