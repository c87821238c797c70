#pragma once
// SPDX-License-Identifier: Apache-2.0

// Forward/reverse KL divergences over discrete token distributions, their
// analytic gradients with respect to student logits, and the generic
// f-divergence family they specialize.
//
// Conventions:
// - natural log throughout;
// - probabilities are clamped to kProbFloor inside log arguments only;
// - terms with weight exactly 0 contribute exactly 0 (the log is never taken);
// - fkl/rkl and their f-divergence specializations share one accumulation
//   path, so the equalities hold bit-for-bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "akl/errors.hpp"
#include "akl/types.hpp"

namespace akl {

namespace detail {

inline double floored(double x) noexcept { return x < kProbFloor ? kProbFloor : x; }

inline double fkl_term(double pj, double qj) noexcept {
  if (pj == 0.0) return 0.0;
  return pj * std::log(floored(pj) / floored(qj));
}

inline double rkl_term(double pj, double qj) noexcept {
  if (qj == 0.0) return 0.0;
  return qj * std::log(floored(qj) / floored(pj));
}

}  // namespace detail

/// Generator functions f for the discrete f-divergence sum_j q_j * f(p_j / q_j).
/// forward_kl: f(x) = x ln x; reverse_kl: f(x) = -ln x.
enum class FGenerator { forward_kl, reverse_kl };

/// Numerically stable softmax: subtracts the max logit before exponentiation.
/// Order-preserving; output sums to 1.
inline Distribution softmax(const LogitVector& z) {
  const std::size_t v = z.size();
  if (v < 2) throw invalid_input("softmax: need at least 2 logits");
  double zmax = z.logits[0];
  for (std::size_t j = 0; j < v; ++j) {
    if (!std::isfinite(z.logits[j])) {
      throw invalid_input("softmax: logit " + std::to_string(j) + " is not finite");
    }
    zmax = std::max(zmax, z.logits[j]);
  }
  std::vector<double> probs(v);
  double norm = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    probs[j] = std::exp(z.logits[j] - zmax);
    norm += probs[j];
  }
  for (double& p : probs) p /= norm;
  return Distribution{std::move(probs)};
}

/// Discrete f-divergence D_f(p||q) = sum_j q_j * f(p_j / q_j) for the
/// registered generators. Nonnegative up to round-off.
inline double f_divergence(const Distribution& p, const Distribution& q, FGenerator f) {
  detail::check_same_length(p.size(), q.size(), "f_divergence");
  double sum = 0.0;
  switch (f) {
    case FGenerator::forward_kl:
      for (std::size_t j = 0; j < p.size(); ++j) sum += detail::fkl_term(p.probs[j], q.probs[j]);
      return sum;
    case FGenerator::reverse_kl:
      for (std::size_t j = 0; j < p.size(); ++j) sum += detail::rkl_term(p.probs[j], q.probs[j]);
      return sum;
  }
  throw invalid_input("f_divergence: unknown generator tag");
}

/// Forward KL: sum_j p_j ln(p_j / q_j).
inline double fkl(const Distribution& p, const Distribution& q) {
  return f_divergence(p, q, FGenerator::forward_kl);
}

/// Reverse KL: sum_j q_j ln(q_j / p_j).
inline double rkl(const Distribution& p, const Distribution& q) {
  return f_divergence(p, q, FGenerator::reverse_kl);
}

namespace detail {

// Gradient forms with the student distribution already materialized.
// Both gradients sum to zero up to round-off (softmax shift invariance).

inline DivergenceEval fkl_grad_at(const Distribution& p, const Distribution& q) {
  DivergenceEval out;
  out.value = fkl(p, q);
  out.grad_student_logits.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    out.grad_student_logits[j] = q.probs[j] - p.probs[j];
  }
  return out;
}

inline DivergenceEval rkl_grad_at(const Distribution& p, const Distribution& q) {
  DivergenceEval out;
  out.value = rkl(p, q);
  out.grad_student_logits.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double qj = q.probs[j];
    out.grad_student_logits[j] =
        qj == 0.0 ? 0.0 : qj * (std::log(floored(qj) / floored(p.probs[j])) - out.value);
  }
  return out;
}

}  // namespace detail

/// Forward KL value and its logit-space gradient d/dz_j = q_j - p_j,
/// q = softmax(z_q).
inline DivergenceEval fkl_grad(const Distribution& p, const LogitVector& z_q) {
  detail::check_same_length(p.size(), z_q.size(), "fkl_grad");
  return detail::fkl_grad_at(p, softmax(z_q));
}

/// Reverse KL value and gradient d/dz_j = q_j * (ln(q_j / p_j) - RKL(p, q)).
inline DivergenceEval rkl_grad(const Distribution& p, const LogitVector& z_q) {
  detail::check_same_length(p.size(), z_q.size(), "rkl_grad");
  return detail::rkl_grad_at(p, softmax(z_q));
}

}  // namespace akl
