// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace daquant {

// Stream addressing. Every random decision in a run is drawn from a stream
// derived as (root_seed, purpose, i, j), so the order in which node and agent
// code executes can never perturb the draws.
enum class StreamPurpose : std::uint64_t {
  Dataset = 1,
  Init = 2,
  Sample = 3,
  Shuffle = 4,
  EncodeStoch = 5,
  Correction = 6,
  Probe = 7,
  Scalar = 8,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  static RandomStream derive(std::uint64_t root, StreamPurpose purpose,
                             std::uint64_t i = 0, std::uint64_t j = 0) {
    std::uint64_t k = splitmix64(root);
    k = splitmix64(k ^ static_cast<std::uint64_t>(purpose));
    k = splitmix64(k ^ i);
    k = splitmix64(k ^ j);
    return RandomStream(k);
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1). 53-bit mantissa construction keeps draws identical
  // across standard library implementations.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), n >= 1, by rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace daquant
