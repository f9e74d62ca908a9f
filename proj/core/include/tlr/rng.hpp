#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tlr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive well-separated child seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a child seed from a base seed and up to three stream tags.
/// Deterministic, so parallel workers can reproduce the exact stream of any
/// (iteration, trajectory) pair regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix_seed(base);
  s = mix_seed(s ^ mix_seed(a + 0x1000));
  s = mix_seed(s ^ mix_seed(b + 0x2000));
  s = mix_seed(s ^ mix_seed(c + 0x3000));
  return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
/// Used instead of std::uniform_real_distribution so the draw sequence is
/// identical across standard-library implementations and never stateful.
inline double uniform_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform_double(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

/// Standard normal via Box-Muller on two uniforms. Stateless (the second
/// Box-Muller variate is discarded) so copies of an engine stay in lockstep.
inline double normal_double(Rng& rng) {
  double u1 = uniform_double(rng);
  double u2 = uniform_double(rng);
  // Guard the log: u1 == 0 happens once per 2^53 draws.
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Uniform integer in [0, n).
inline int uniform_int(Rng& rng, int n) {
  return static_cast<int>(uniform_double(rng) * static_cast<double>(n));
}

}  // namespace tlr
