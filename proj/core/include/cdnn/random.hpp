#pragma once

#include <cstdint>
#include <random>

namespace cdnn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; maps (seed, stream) to a well-mixed sub-seed so that
/// parallel trials draw from independent, reproducible streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

}  // namespace cdnn
