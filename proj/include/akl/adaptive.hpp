#pragma once
// SPDX-License-Identifier: Apache-2.0

// Head-mask selection over the teacher distribution, head/tail gap
// computation, and the adaptively weighted KL combinations built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "akl/divergence.hpp"
#include "akl/errors.hpp"
#include "akl/types.hpp"

namespace akl {

/// Binary head/tail split of the vocabulary. Selected entries are the
/// minimal-cardinality set of highest-probability indices whose mass
/// reaches the threshold; ties broken by ascending index.
struct HeadMask {
  std::vector<std::uint8_t> mask;  // 1 = head, 0 = tail
  double head_mass = 0.0;

  bool is_head(std::size_t j) const noexcept { return mask[j] != 0; }
  std::size_t cardinality() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
};

/// Pointwise gap functions usable in head/tail gap sums.
enum class GapFn { abs_diff };

/// Head/tail fitting gaps and the loss weights they induce.
/// w_fkl + w_rkl == 1 exactly; both lie in [0, 1].
struct GapReport {
  double g_head = 0.0;
  double g_tail = 0.0;
  double w_fkl = 0.5;
  double w_rkl = 0.5;
  HeadMask mask;
};

/// Minimal-cardinality mask whose selected mass reaches mu, built as the
/// shortest prefix of indices sorted by descending probability (equal
/// probabilities ordered by ascending index). head_mass is recomputed as the
/// ascending-index sum over the selected set, and the prefix is extended if
/// reordering rounding leaves that sum short of mu.
inline HeadMask solve_head_mask(const Distribution& p, double mu) {
  if (!(mu > 0.0) || mu > 1.0) {
    throw invalid_input("solve_head_mask: mu must lie in (0, 1], got " + std::to_string(mu));
  }
  const std::size_t v = p.size();
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p.probs[a] != p.probs[b]) return p.probs[a] > p.probs[b];
    return a < b;
  });

  HeadMask out;
  out.mask.assign(v, 0);
  std::size_t k = 0;
  double cum = 0.0;
  while (k < v) {
    cum += p.probs[order[k]];
    out.mask[order[k]] = 1;
    ++k;
    if (cum >= mu) break;
  }
  auto selected_mass = [&]() {
    double m = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      if (out.mask[j]) m += p.probs[j];
    }
    return m;
  };
  out.head_mass = selected_mass();
  while (out.head_mass < mu && k < v) {
    out.mask[order[k]] = 1;
    ++k;
    out.head_mass = selected_mass();
  }
  return out;
}

/// Gap of each side of the mask under the chosen pointwise gap function,
/// plus the induced loss weights. When both gaps vanish the weights fall
/// back to (0.5, 0.5).
inline GapReport compute_gaps(const Distribution& p, const Distribution& q,
                              const HeadMask& mask, GapFn eps) {
  detail::check_same_length(p.size(), q.size(), "compute_gaps");
  detail::check_same_length(p.size(), mask.mask.size(), "compute_gaps mask");
  if (eps != GapFn::abs_diff) {
    throw invalid_input("compute_gaps: unknown gap-function tag");
  }
  GapReport out;
  out.mask = mask;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = std::abs(p.probs[j] - q.probs[j]);
    if (mask.is_head(j)) {
      out.g_head += d;
    } else {
      out.g_tail += d;
    }
  }
  const double total = out.g_head + out.g_tail;
  if (total > 0.0) {
    out.w_fkl = out.g_head / total;
    out.w_rkl = 1.0 - out.w_fkl;
  } else {
    out.w_fkl = 0.5;
    out.w_rkl = 0.5;
  }
  return out;
}

/// DivergenceEval plus the gap report the adaptive weights came from.
struct AdaptiveEval {
  DivergenceEval eval;
  GapReport gaps;
};

namespace detail {

// Convex blend of the two KL evaluations with the given weights. The weights
// are constants here: they are recomputed at every evaluation point but not
// differentiated through.
inline DivergenceEval blend(const DivergenceEval& f, const DivergenceEval& r,
                            double w_fkl, double w_rkl) {
  DivergenceEval out;
  out.value = w_fkl * f.value + w_rkl * r.value;
  out.grad_student_logits.resize(f.grad_student_logits.size());
  for (std::size_t j = 0; j < out.grad_student_logits.size(); ++j) {
    out.grad_student_logits[j] =
        w_fkl * f.grad_student_logits[j] + w_rkl * r.grad_student_logits[j];
  }
  return out;
}

inline AdaptiveEval adaptive_eval(const Distribution& p, const LogitVector& z_q, double mu,
                                  GapFn eps, bool flip_weights) {
  check_same_length(p.size(), z_q.size(), "akl");
  const Distribution q = softmax(z_q);
  AdaptiveEval out;
  out.gaps = compute_gaps(p, q, solve_head_mask(p, mu), eps);
  if (flip_weights) std::swap(out.gaps.w_fkl, out.gaps.w_rkl);
  out.eval = blend(fkl_grad_at(p, q), rkl_grad_at(p, q), out.gaps.w_fkl, out.gaps.w_rkl);
  return out;
}

}  // namespace detail

/// Adaptive KL: w_fkl * FKL + w_rkl * RKL with weights proportional to the
/// head/tail gaps of the current student against the teacher.
inline AdaptiveEval akl_detailed(const Distribution& p, const LogitVector& z_q, double mu,
                                 GapFn eps = GapFn::abs_diff) {
  return detail::adaptive_eval(p, z_q, mu, eps, /*flip_weights=*/false);
}

/// Ablation variant with the two weights swapped.
inline AdaptiveEval akl_r_detailed(const Distribution& p, const LogitVector& z_q, double mu,
                                   GapFn eps = GapFn::abs_diff) {
  return detail::adaptive_eval(p, z_q, mu, eps, /*flip_weights=*/true);
}

inline DivergenceEval akl(const Distribution& p, const LogitVector& z_q, double mu,
                          GapFn eps = GapFn::abs_diff) {
  return akl_detailed(p, z_q, mu, eps).eval;
}

inline DivergenceEval akl_r(const Distribution& p, const LogitVector& z_q, double mu,
                            GapFn eps = GapFn::abs_diff) {
  return akl_r_detailed(p, z_q, mu, eps).eval;
}

/// Fixed convex mix alpha * FKL + (1 - alpha) * RKL.
inline DivergenceEval fixed_mix(const Distribution& p, const LogitVector& z_q, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw invalid_input("fixed_mix: alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  detail::check_same_length(p.size(), z_q.size(), "fixed_mix");
  const Distribution q = softmax(z_q);
  return detail::blend(detail::fkl_grad_at(p, q), detail::rkl_grad_at(p, q), alpha, 1.0 - alpha);
}

// ---------------------------------------------------------------------------
// Divergence selection shared by the trainers, the oracle, and the CLI.
// ---------------------------------------------------------------------------

enum class DivergenceKind { fkl, rkl, fixed_mix, akl, akl_r };

struct DivergenceSpec {
  DivergenceKind kind = DivergenceKind::fkl;
  double alpha = 0.5;  // fixed_mix only
};

/// One divergence evaluation at a training step: value, gradient, the student
/// distribution it was computed from, and the gap report for adaptive kinds.
struct StepEval {
  DivergenceEval eval;
  Distribution student;
  std::optional<GapReport> gaps;
};

inline StepEval evaluate_divergence(const DivergenceSpec& spec, const Distribution& p,
                                    const LogitVector& z_q, double mu,
                                    GapFn eps = GapFn::abs_diff) {
  detail::check_same_length(p.size(), z_q.size(), "evaluate_divergence");
  StepEval out;
  out.student = softmax(z_q);
  switch (spec.kind) {
    case DivergenceKind::fkl:
      out.eval = detail::fkl_grad_at(p, out.student);
      return out;
    case DivergenceKind::rkl:
      out.eval = detail::rkl_grad_at(p, out.student);
      return out;
    case DivergenceKind::fixed_mix:
      if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
        throw invalid_input("fixed_mix: alpha must lie in [0, 1]");
      }
      out.eval = detail::blend(detail::fkl_grad_at(p, out.student),
                               detail::rkl_grad_at(p, out.student), spec.alpha,
                               1.0 - spec.alpha);
      return out;
    case DivergenceKind::akl:
    case DivergenceKind::akl_r: {
      GapReport gaps = compute_gaps(p, out.student, solve_head_mask(p, mu), eps);
      if (spec.kind == DivergenceKind::akl_r) std::swap(gaps.w_fkl, gaps.w_rkl);
      out.eval = detail::blend(detail::fkl_grad_at(p, out.student),
                               detail::rkl_grad_at(p, out.student), gaps.w_fkl, gaps.w_rkl);
      out.gaps = std::move(gaps);
      return out;
    }
  }
  throw invalid_input("evaluate_divergence: unknown divergence kind");
}

/// Parses a divergence tag: fkl | rkl | akl | akl_r | fixed_mix | fixed_mix(a).
inline DivergenceSpec parse_divergence_tag(std::string_view tag) {
  if (tag == "fkl") return {DivergenceKind::fkl, 0.5};
  if (tag == "rkl") return {DivergenceKind::rkl, 0.5};
  if (tag == "akl") return {DivergenceKind::akl, 0.5};
  if (tag == "akl_r") return {DivergenceKind::akl_r, 0.5};
  if (tag == "fixed_mix") return {DivergenceKind::fixed_mix, 0.5};
  if (tag.rfind("fixed_mix(", 0) == 0 && tag.back() == ')') {
    const std::string inner(tag.substr(10, tag.size() - 11));
    std::size_t used = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(inner, &used);
    } catch (const std::exception&) {
      throw invalid_input("bad fixed_mix alpha: '" + inner + "'");
    }
    if (used != inner.size() || !(alpha >= 0.0 && alpha <= 1.0)) {
      throw invalid_input("bad fixed_mix alpha: '" + inner + "'");
    }
    return {DivergenceKind::fixed_mix, alpha};
  }
  throw invalid_input("unknown divergence tag: '" + std::string(tag) + "'");
}

inline std::string divergence_tag(const DivergenceSpec& spec) {
  switch (spec.kind) {
    case DivergenceKind::fkl: return "fkl";
    case DivergenceKind::rkl: return "rkl";
    case DivergenceKind::akl: return "akl";
    case DivergenceKind::akl_r: return "akl_r";
    case DivergenceKind::fixed_mix: {
      std::ostringstream os;
      os << "fixed_mix(" << spec.alpha << ")";
      return os.str();
    }
  }
  throw invalid_input("divergence_tag: unknown divergence kind");
}

}  // namespace akl
