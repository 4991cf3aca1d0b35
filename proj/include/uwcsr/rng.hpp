#pragma once

#include <cstdint>
#include <random>

namespace uwcsr {

using Rng = std::mt19937_64;

// Derives independent stream seeds from a master seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream tags used when splitting a per-frame seed.
enum class Stream : std::uint64_t {
  channel = 1,
  payload = 2,
  noise = 3,
  shuffle = 4,
  init = 5,
  snr = 6,
  bootstrap = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream s) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
}

}  // namespace uwcsr
