#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace edgepower {

// Number of draws produced per seed block. Every Monte Carlo routine consumes
// randomness in fixed-size blocks with independently derived stream seeds, so
// estimates are a pure function of (problem, n_samples, seed) no matter how the
// blocks are scheduled across threads. Changing this constant would change
// every seeded result; it is part of the reproducibility contract.
inline constexpr std::size_t kSeedBlock = 1024;

// splitmix64 output mixer; full-avalanche 64-bit finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream seed for block `block` of a run seeded with `seed`.
constexpr std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) noexcept {
    return mix64(seed + (block + 1) * 0x9e3779b97f4a7c15ULL);
}

inline std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t block) {
    return std::mt19937_64(block_seed(seed, block));
}

// Derives an effectively independent seed for a named sub-stream (e.g. one row
// of a figure grid) from a user-facing master seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return mix64(seed ^ mix64(tag));
}

}  // namespace edgepower
