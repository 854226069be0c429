#pragma once

#include <cstdint>
#include <random>

namespace ltsim {

/// SplitMix64 finalizer. Used to derive well-separated engine seeds from
/// user seeds, replica indices and stream tags.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream tags keep the noise and the initial-condition draws of one run
/// independent while both derive from the same user seed.
enum class StreamTag : std::uint64_t {
  Noise = 0x6E6F697365ULL,
  Initial = 0x696E6974ULL,
  Sampler = 0x73616D70ULL,
  Bridge = 0x627269646765ULL,
};

inline std::mt19937_64 make_engine(std::uint64_t seed, StreamTag tag) {
  const std::uint64_t s = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

/// Seed of replica `index` for a run with `base_seed`.
constexpr std::uint64_t replica_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return splitmix64(base_seed + index);
}

}  // namespace ltsim
