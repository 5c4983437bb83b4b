#pragma once

#include <cstdint>
#include <random>

namespace craniotk {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; mixes a master seed with a stream index so that
/// per-case streams do not depend on processing order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(derive_seed(seed, 0)); }

} // namespace craniotk
