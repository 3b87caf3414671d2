#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace warpfault {

/// splitmix64 finalizer; the mixing step behind every derived seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Child seed for stream `tag`, element `index` under `master`:
/// mix64(mix64(master ^ fnv1a64(tag)) + index). Children never depend on
/// each other, so any subset can be generated in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  return mix64(mix64(master ^ fnv1a64(tag)) + index);
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Rejection sampling on raw engine output so the
/// draw sequence is identical on every standard library.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t skip = (std::uint64_t{0} - n) % n;  // 2^64 mod n
  std::uint64_t x;
  do {
    x = rng();
  } while (x < skip);
  return x % n;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace warpfault
