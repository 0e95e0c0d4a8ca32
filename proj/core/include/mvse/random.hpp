// SPDX-License-Identifier: Apache-2.0
//
// Seeded random source with distribution code written out here, so that
// streams are identical across standard-library implementations (the
// std::*_distribution algorithms are implementation-defined).
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mvse {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  double normal();
  /// Poisson draw; inversion for small means, normal approximation above 500.
  std::uint64_t poisson(double mean);
  /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvse
