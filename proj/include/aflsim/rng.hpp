#pragma once
#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace aflsim {

using RngEngine = std::mt19937_64;

// All draws go through the helpers below instead of <random> distributions,
// so a given seed produces the same stream on every standard library.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent engine from a base seed and a stream tag.
inline RngEngine derive_engine(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x517cc1b727220a95ULL * (stream + 1));
  return RngEngine(splitmix64(s));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(RngEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(RngEngine& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). n must be >= 1.
inline std::uint64_t uniform_index(RngEngine& rng, std::uint64_t n) {
  // Modulo bias is < 2^-53 for any n used here.
  return rng() % n;
}

inline int uniform_int(RngEngine& rng, int lo, int hi_inclusive) {
  return lo + static_cast<int>(uniform_index(
                  rng, static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
}

/// Standard normal via Box-Muller; draws two uniforms per call.
inline double normal01(RngEngine& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Fisher-Yates shuffle driven by the engine (stable across platforms).
template <typename T>
void shuffle(RngEngine& rng, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace aflsim
