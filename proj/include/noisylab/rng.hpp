#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace noisylab::rng {

// All randomness flows through these helpers. std:: distributions have
// implementation-defined sequences, so draws are derived from raw
// mt19937_64 output to keep datasets and runs reproducible across builds.
using Engine = std::mt19937_64;

// Uniform in [0, 1) with 53-bit resolution.
inline double uniform01(Engine& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection; n > 0.
inline uint64_t bounded(Engine& g, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

// One standard normal draw via Box-Muller (the cosine leg; the sine leg is
// discarded to keep the stream position independent of caller pairing).
inline double normal(Engine& g) {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::vector<int> shuffled_indices(int n, Engine& g) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(bounded(g, static_cast<uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace noisylab::rng
