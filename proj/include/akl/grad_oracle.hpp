#pragma once
// SPDX-License-Identifier: Apache-2.0

// Independent verification oracles: central finite differences against the
// value-only divergence path, and exhaustive head-mask search. Used by the
// test suites; kept free of any shared state with the analytic gradients.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "akl/adaptive.hpp"
#include "akl/divergence.hpp"
#include "akl/errors.hpp"
#include "akl/types.hpp"

namespace akl {

struct FDConfig {
  double step = 1e-6;          // central-difference step
  double rel_tolerance = 1e-5; // callers compare with max(rel * |analytic|, floor)
};

/// Central-difference gradient of the chosen divergence with respect to the
/// student logits, with the teacher fixed. The loss is recomputed from
/// scratch through the value functions at every probe point. For adaptive
/// kinds the head/tail weights are pinned to their values at z_q, matching
/// the constant-weight gradient contract.
inline std::vector<double> finite_diff_grad(const DivergenceSpec& divergence,
                                            const Distribution& p, const LogitVector& z_q,
                                            double mu, const FDConfig& cfg = {}) {
  if (!(cfg.step > 0.0)) throw invalid_input("finite_diff_grad: step must be positive");
  detail::check_same_length(p.size(), z_q.size(), "finite_diff_grad");

  double w_fkl = 0.0;
  double w_rkl = 0.0;
  switch (divergence.kind) {
    case DivergenceKind::fkl: w_fkl = 1.0; break;
    case DivergenceKind::rkl: w_rkl = 1.0; break;
    case DivergenceKind::fixed_mix:
      w_fkl = divergence.alpha;
      w_rkl = 1.0 - divergence.alpha;
      break;
    case DivergenceKind::akl:
    case DivergenceKind::akl_r: {
      GapReport gaps = compute_gaps(p, softmax(z_q), solve_head_mask(p, mu), GapFn::abs_diff);
      w_fkl = gaps.w_fkl;
      w_rkl = gaps.w_rkl;
      if (divergence.kind == DivergenceKind::akl_r) std::swap(w_fkl, w_rkl);
      break;
    }
  }

  auto loss = [&](const LogitVector& z) {
    const Distribution q = softmax(z);
    double value = 0.0;
    if (w_fkl != 0.0) value += w_fkl * fkl(p, q);
    if (w_rkl != 0.0) value += w_rkl * rkl(p, q);
    if (!std::isfinite(value)) {
      throw oracle_failure("finite_diff_grad: non-finite loss evaluation");
    }
    return value;
  };

  std::vector<double> grad(z_q.size());
  LogitVector probe = z_q;
  for (std::size_t j = 0; j < z_q.size(); ++j) {
    const double zj = z_q.logits[j];
    probe.logits[j] = zj + cfg.step;
    const double up = loss(probe);
    probe.logits[j] = zj - cfg.step;
    const double down = loss(probe);
    probe.logits[j] = zj;
    grad[j] = (up - down) / (2.0 * cfg.step);
  }
  return grad;
}

struct BruteForceMaskResult {
  std::size_t min_cardinality = 0;
  std::vector<std::vector<std::uint8_t>> optimal_masks;
};

/// Exhaustive search over all 2^V masks: minimum cardinality among masks
/// whose selected mass reaches mu, and every mask achieving it. If rounding
/// leaves even the full set short of mu, the full mask is the unique answer.
inline BruteForceMaskResult brute_force_mask(const Distribution& p, double mu) {
  if (!(mu > 0.0) || mu > 1.0) {
    throw invalid_input("brute_force_mask: mu must lie in (0, 1], got " + std::to_string(mu));
  }
  const std::size_t v = p.size();
  if (v > 20) {
    throw size_limit_exceeded("brute_force_mask: V = " + std::to_string(v) +
                              " exceeds the enumeration cap of 20");
  }
  BruteForceMaskResult out;
  out.min_cardinality = v + 1;
  const std::uint32_t limit = std::uint32_t{1} << v;
  for (std::uint32_t bits = 0; bits < limit; ++bits) {
    double mass = 0.0;
    std::size_t card = 0;
    for (std::size_t j = 0; j < v; ++j) {
      if (bits & (std::uint32_t{1} << j)) {
        mass += p.probs[j];
        ++card;
      }
    }
    if (mass < mu || card > out.min_cardinality) continue;
    if (card < out.min_cardinality) {
      out.min_cardinality = card;
      out.optimal_masks.clear();
    }
    std::vector<std::uint8_t> mask(v, 0);
    for (std::size_t j = 0; j < v; ++j) {
      if (bits & (std::uint32_t{1} << j)) mask[j] = 1;
    }
    out.optimal_masks.push_back(std::move(mask));
  }
  if (out.optimal_masks.empty()) {
    out.min_cardinality = v;
    out.optimal_masks.emplace_back(v, std::uint8_t{1});
  }
  return out;
}

}  // namespace akl
