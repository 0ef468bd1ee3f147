#pragma once

#include <cstdint>
#include <random>

namespace ens {

/// splitmix64 finalizer. All seed derivation in this project goes through
/// this mix so that nearby user seeds do not produce correlated streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derive the seed for an independent stream from a master seed.
/// Stream 0, 1, 2, ... index the consumers documented at each call site
/// (e.g. one stream per Monte-Carlo replication, one per search iteration).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9E3779B97F4A7C15ULL + 1));
}

/// Two-level derivation for nested loops (e.g. batch-size index x replication).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

/// Radical-inverse in the given base; Halton components for quasi-random
/// multistart points.
inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

/// d-th coordinate (0-based) of the Halton point with the given index.
/// Supports the dimensions this project needs; bases are the first primes.
inline double halton(std::uint64_t index, int dim) {
  static constexpr std::uint64_t kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                              23, 29, 31, 37, 41, 43, 47, 53};
  const int n = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));
  return radical_inverse(index + 1, kPrimes[dim % n]);
}

}  // namespace ens
