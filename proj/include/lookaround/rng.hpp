#pragma once

#include <cstdint>
#include <random>

namespace lookaround {

/// splitmix64 finalizer; used to derive independent RNG streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Stream seeded from (seed, stream ids). Streams with distinct ids are
/// independent, so per-sequence work can run in parallel and still be
/// bit-identical to a serial run.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(seed ^ 0x6c6f6f6b61726e64ull);
  s = mix64(s ^ mix64(a));
  s = mix64(s ^ mix64(b));
  return std::mt19937_64(s);
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace lookaround
