#pragma once
// SPDX-License-Identifier: Apache-2.0

// Gradient descent of a student logit vector toward a fixed teacher
// distribution, tracing loss and head/tail fitting errors per epoch.
// Row e of a trace describes the student after e updates, so row 0 is the
// initial state and a trace holds epochs + 1 rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "akl/adaptive.hpp"
#include "akl/divergence.hpp"
#include "akl/errors.hpp"
#include "akl/rng.hpp"
#include "akl/types.hpp"

namespace akl {

enum class InitKind { uniform, random_normal, explicit_logits };

struct InitSpec {
  InitKind kind = InitKind::uniform;
  double sigma = 1.0;                 // random_normal only
  std::vector<double> logits;         // explicit_logits only
};

/// Deterministic student initialization. uniform: all-zero logits (softmax
/// gives the uniform distribution); random_normal: N(0, sigma^2) entries from
/// the seeded generator; explicit_logits: validated passthrough.
inline LogitVector init_student(std::size_t v, std::uint64_t seed, const InitSpec& init) {
  if (v < 2) throw invalid_input("init_student: need at least 2 bins");
  switch (init.kind) {
    case InitKind::uniform:
      return LogitVector{std::vector<double>(v, 0.0)};
    case InitKind::random_normal: {
      if (!(init.sigma > 0.0)) throw invalid_input("init_student: sigma must be positive");
      std::mt19937_64 gen(seed);
      std::vector<double> z(v);
      for (auto& zj : z) zj = init.sigma * rng::next_normal(gen);
      return LogitVector{std::move(z)};
    }
    case InitKind::explicit_logits: {
      auto out = make_logits(init.logits);
      if (out.size() != v) throw invalid_input("init_student: explicit logits have wrong length");
      return out;
    }
  }
  throw invalid_input("init_student: unknown init kind");
}

struct TrainConfig {
  DivergenceSpec divergence;
  int epochs = 2000;
  double learning_rate = 0.5;
  double mu = 0.5;
  GapFn gap = GapFn::abs_diff;
  std::uint64_t seed = 0;
  std::vector<int> snapshot_epochs;
  double convergence_tol = 1e-3;
  InitSpec init;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw invalid_input("train config: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw invalid_input("train config: learning_rate must be > 0");
  if (!(cfg.convergence_tol > 0.0)) throw invalid_input("train config: convergence_tol must be > 0");
  if (!(cfg.mu > 0.0) || cfg.mu > 1.0) throw invalid_input("train config: mu must lie in (0, 1]");
  for (int e : cfg.snapshot_epochs) {
    if (e < 0 || e > cfg.epochs) {
      throw invalid_input("train config: snapshot epoch " + std::to_string(e) +
                          " outside [0, epochs]");
    }
  }
}

struct TraceRow {
  double loss = 0.0;
  double head_error = 0.0;
  double tail_error = 0.0;
  double max_abs_error = 0.0;
  bool has_weights = false;  // true only for the adaptive divergences
  double w_fkl = 0.0;
  double w_rkl = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;  // rows[e] = state after e updates
  std::vector<std::pair<int, Distribution>> snapshots;
  std::optional<int> converged_at;  // first epoch with max_abs_error < tol
};

namespace detail {

// Head/tail/max errors of q against p under a fixed mask; one ascending-index
// pass so head_error + tail_error is the L1 distance under this grouping.
struct SplitErrors {
  double head = 0.0;
  double tail = 0.0;
  double max_abs = 0.0;
};

inline SplitErrors split_errors(const Distribution& p, const Distribution& q,
                                const HeadMask& mask) {
  SplitErrors out;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double d = std::abs(p.probs[j] - q.probs[j]);
    if (mask.is_head(j)) {
      out.head += d;
    } else {
      out.tail += d;
    }
    out.max_abs = std::max(out.max_abs, d);
  }
  return out;
}

}  // namespace detail

/// Full-batch gradient descent z <- z - lr * grad for cfg.epochs epochs.
/// Metrics are recorded at every state against the teacher's head mask at
/// cfg.mu. Deterministic for fixed inputs.
inline TrainingTrace train(const Distribution& teacher, const LogitVector& student0,
                           const TrainConfig& cfg) {
  validate(cfg);
  detail::check_same_length(teacher.size(), student0.size(), "train");
  const HeadMask metric_mask = solve_head_mask(teacher, cfg.mu);

  TrainingTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  LogitVector z = student0;
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    StepEval ev;
    try {
      ev = evaluate_divergence(cfg.divergence, teacher, z, cfg.mu, cfg.gap);
    } catch (const std::exception& e) {
      throw training_failure(epoch, e.what());
    }
    if (!std::isfinite(ev.eval.value)) {
      throw training_failure(epoch, "non-finite loss value");
    }

    const auto err = detail::split_errors(teacher, ev.student, metric_mask);
    TraceRow row;
    row.loss = ev.eval.value;
    row.head_error = err.head;
    row.tail_error = err.tail;
    row.max_abs_error = err.max_abs;
    if (ev.gaps) {
      row.has_weights = true;
      row.w_fkl = ev.gaps->w_fkl;
      row.w_rkl = ev.gaps->w_rkl;
    }
    trace.rows.push_back(row);

    if (!trace.converged_at && err.max_abs < cfg.convergence_tol) {
      trace.converged_at = epoch;
    }
    if (std::find(cfg.snapshot_epochs.begin(), cfg.snapshot_epochs.end(), epoch) !=
        cfg.snapshot_epochs.end()) {
      trace.snapshots.emplace_back(epoch, ev.student);
    }

    if (epoch < cfg.epochs) {
      for (std::size_t j = 0; j < z.size(); ++j) {
        z.logits[j] -= cfg.learning_rate * ev.eval.grad_student_logits[j];
      }
    }
  }
  return trace;
}

/// Student start state for the head/tail dynamics experiment: the teacher's
/// head over-weighted by a per-seed factor, the tail damped, and a spurious
/// bump placed away from every teacher mode. Gives the two losses distinct
/// early work: the forward KL must deflate the head overshoot, the reverse
/// KL must drain the misplaced tail mass. Uniform or per-bin-noise starts
/// do not separate the two losses at early epochs.
inline LogitVector head_tail_init(const Distribution& teacher,
                                  const std::vector<double>& mode_centers, double mu,
                                  std::uint64_t seed) {
  const std::size_t v = teacher.size();
  if (v < 2) throw invalid_input("head_tail_init: need at least 2 bins");
  const HeadMask mask = solve_head_mask(teacher, mu);
  std::mt19937_64 gen(seed);
  const double head_gain = 1.2 + 0.6 * rng::next_unit(gen);
  const double tail_damp = 0.05 + 0.15 * rng::next_unit(gen);
  const double bump_weight = 0.15 + 0.2 * rng::next_unit(gen);
  double center = 0.5;
  for (int attempt = 0; attempt < 200; ++attempt) {
    center = 0.02 + 0.96 * rng::next_unit(gen);
    bool clear = true;
    for (double m : mode_centers) {
      if (std::abs(center - m) < 0.12) {
        clear = false;
        break;
      }
    }
    if (clear) break;
  }
  const double width = 0.04 + 0.06 * rng::next_unit(gen);

  std::vector<double> bump(v);
  double bump_norm = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(v - 1);
    const double d = (x - center) / width;
    bump[j] = std::exp(-0.5 * d * d);
    bump_norm += bump[j];
  }

  std::vector<double> q0(v);
  double norm = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    const double base = mask.is_head(j) ? head_gain * teacher.probs[j]
                                        : tail_damp * teacher.probs[j];
    q0[j] = base + bump_weight * bump[j] / bump_norm;
    norm += q0[j];
  }
  std::vector<double> z(v);
  for (std::size_t j = 0; j < v; ++j) {
    z[j] = std::log(std::max(q0[j] / norm, 1e-300));
  }
  return LogitVector{std::move(z)};
}

struct ComparisonRun {
  DivergenceSpec divergence;
  TrainingTrace trace;
};

struct ComparisonRecord {
  LogitVector student0;
  std::vector<ComparisonRun> runs;
};

/// Trains each of {fkl, rkl, fixed_mix(0.5), akl, akl_r} from one shared
/// student initialization derived from (seed, cfg_base.init).
inline ComparisonRecord compare_divergences(const Distribution& teacher, std::uint64_t seed,
                                            const TrainConfig& cfg_base) {
  validate(cfg_base);
  ComparisonRecord record;
  record.student0 = init_student(teacher.size(), seed, cfg_base.init);
  const DivergenceSpec kinds[] = {
      {DivergenceKind::fkl, 0.5},       {DivergenceKind::rkl, 0.5},
      {DivergenceKind::fixed_mix, 0.5}, {DivergenceKind::akl, 0.5},
      {DivergenceKind::akl_r, 0.5},
  };
  for (const auto& spec : kinds) {
    TrainConfig cfg = cfg_base;
    cfg.seed = seed;
    cfg.divergence = spec;
    record.runs.push_back({spec, train(teacher, record.student0, cfg)});
  }
  return record;
}

}  // namespace akl
