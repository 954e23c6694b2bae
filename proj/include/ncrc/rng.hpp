#pragma once

#include <cstdint>
#include <random>

namespace ncrc {

// All stochastic components draw from mt19937_64 engines owned by their
// simulation instance. Replications derive their seeds from the master seed
// with a counter-based splitmix64 hash, so adding replications or sweep
// points never perturbs the streams of earlier ones.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives the seed of substream `stream` from `master`. Streams 0,1,2,... are
// mutually independent for practical purposes.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64_next(s);
  s = a ^ (stream * 0xda942042e4dd58b5ull + 0x2545f4914f6cdd1dull);
  std::uint64_t lo = splitmix64_next(s);
  std::uint64_t hi = splitmix64_next(s);
  return lo ^ (hi << 1);
}

}  // namespace ncrc
