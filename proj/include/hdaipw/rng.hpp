#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hdaipw {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based seed derivation: the seed of (master, stream, index) is a pure
/// function of its arguments, so replicate streams never depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

Rng make_rng(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

}  // namespace hdaipw
