#pragma once

#include <cstdint>
#include <random>

namespace wbsgd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the stream addressed by (root, tags...). Distinct tag tuples give
/// statistically independent streams, so trials and batches never share RNG
/// state and results do not depend on execution order.
template <class... Tags>
constexpr std::uint64_t substream_seed(std::uint64_t root, Tags... tags) {
  std::uint64_t s = mix64(root);
  ((s = mix64(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

template <class... Tags>
Rng make_rng(std::uint64_t root, Tags... tags) {
  return Rng(substream_seed(root, tags...));
}

}  // namespace wbsgd
