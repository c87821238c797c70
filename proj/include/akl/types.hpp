#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "akl/errors.hpp"

namespace akl {

/// Floor applied to probabilities inside log arguments only. Keeps logs finite
/// while perturbing values by at most V * 1e-12.
inline constexpr double kProbFloor = 1e-12;

/// Tolerance on |sum(probs) - 1| accepted at construction.
inline constexpr double kSimplexTol = 1e-9;

/// Probability vector over a vocabulary; entries nonnegative, summing to 1.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
};

/// Pre-softmax real vector; all entries finite.
struct LogitVector {
  std::vector<double> logits;

  std::size_t size() const noexcept { return logits.size(); }
};

/// Scalar divergence value plus its gradient with respect to student logits.
struct DivergenceEval {
  double value = 0.0;
  std::vector<double> grad_student_logits;
};

/// Validates and wraps a probability vector: V >= 2, entries >= 0,
/// sum within kSimplexTol of 1.
inline Distribution make_distribution(std::vector<double> probs) {
  if (probs.size() < 2) {
    throw invalid_input("distribution needs at least 2 entries, got " +
                        std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = probs[j];
    if (!(p >= 0.0)) {  // also rejects NaN
      throw invalid_input("distribution entry " + std::to_string(j) + " is negative or NaN");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw invalid_input("distribution sums to " + std::to_string(sum) + ", expected 1");
  }
  return Distribution{std::move(probs)};
}

/// Validates and wraps a logit vector: V >= 2, all entries finite.
inline LogitVector make_logits(std::vector<double> logits) {
  if (logits.size() < 2) {
    throw invalid_input("logit vector needs at least 2 entries, got " +
                        std::to_string(logits.size()));
  }
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!std::isfinite(logits[j])) {
      throw invalid_input("logit entry " + std::to_string(j) + " is not finite");
    }
  }
  return LogitVector{std::move(logits)};
}

namespace detail {

inline void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw invalid_input(std::string(what) + ": length mismatch (" + std::to_string(a) +
                        " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

}  // namespace akl
