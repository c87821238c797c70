#pragma once
// SPDX-License-Identifier: Apache-2.0

// Deterministic draws on top of std::mt19937_64. The transforms are spelled
// out here (rather than using std::*_distribution) so that identical seeds
// give identical streams across standard-library implementations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace akl::rng {

/// Uniform double in [0, 1) with 53 random bits.
inline double next_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; consumes two draws, returns one value.
inline double next_normal(std::mt19937_64& gen) {
  double u1 = next_unit(gen);
  const double u2 = next_unit(gen);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
}

/// Index draw from a probability vector by inverse-CDF walk.
inline std::size_t next_categorical(std::mt19937_64& gen, const std::vector<double>& probs) {
  const double u = next_unit(gen);
  double cum = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    cum += probs[j];
    if (u < cum) return j;
  }
  return probs.size() - 1;
}

}  // namespace akl::rng
