#pragma once

#include <cstdint>
#include <random>

namespace ksptrack {

// std::mt19937_64 output is fixed by the standard; the distributions are not,
// so bounded draws below are implemented here to stay platform independent.
using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic stream for (seed, stream_id). Distinct stream ids give
/// decorrelated engines.
inline Rng seeded_rng(std::uint64_t seed, std::uint64_t stream_id) {
  return Rng(detail::splitmix64(seed ^ detail::splitmix64(stream_id + 0x632BE59BD9B4E019ULL)));
}

/// Stream ids used by the pipeline. Each purpose owns a disjoint range.
enum class StreamPurpose : std::uint64_t { ForestTree = 1, Lfda = 2, Synth = 3 };

constexpr std::uint64_t stream_key(StreamPurpose purpose, std::uint64_t direction, std::uint64_t iteration,
                                   std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(purpose) << 56) ^ (direction << 52) ^ (iteration << 36) ^ index;
}

/// Uniform integer in [0, n), unbiased (rejection sampling).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace ksptrack
