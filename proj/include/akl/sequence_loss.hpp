#pragma once
// SPDX-License-Identifier: Apache-2.0

// Step-wise distillation objective over tabular autoregressive models: the
// sequence loss is the sum of per-token divergences between the two models'
// next-token distributions on shared (teacher-forced) prefixes. For the
// adaptive divergences the mask and weights are recomputed at every token.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "akl/adaptive.hpp"
#include "akl/errors.hpp"
#include "akl/tabular_lm.hpp"
#include "akl/toy_trainer.hpp"
#include "akl/types.hpp"

namespace akl {

struct SequenceLossReport {
  double total = 0.0;
  std::vector<DivergenceEval> per_token;
  // (w_fkl, w_rkl) per position; filled only for akl / akl_r.
  std::vector<std::pair<double, double>> per_token_weights;
};

namespace detail {

inline void check_vocab(const TabularLM& teacher, const TabularLM& student) {
  if (teacher.vocab() != student.vocab()) {
    throw invalid_input("sequence loss: vocabulary mismatch (" +
                        std::to_string(teacher.vocab()) + " vs " +
                        std::to_string(student.vocab()) + ")");
  }
}

inline void check_sequence(const TokenSequence& seq, std::size_t vocab) {
  if (seq.tokens.empty()) throw invalid_input("sequence loss: empty sequence");
  for (std::int32_t tok : seq.tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= vocab) {
      throw invalid_input("sequence loss: token " + std::to_string(tok) +
                          " outside vocabulary");
    }
  }
}

}  // namespace detail

/// Teacher-forced sequence loss: at every position t the two models are
/// conditioned on the same prefix of seq, and the chosen divergence is
/// evaluated between their next-token distributions. total is the sum over
/// positions.
inline SequenceLossReport sequence_loss(const TabularLM& teacher, const TabularLM& student,
                                        const TokenSequence& seq,
                                        const DivergenceSpec& divergence, double mu) {
  detail::check_vocab(teacher, student);
  detail::check_sequence(seq, teacher.vocab());
  const bool adaptive =
      divergence.kind == DivergenceKind::akl || divergence.kind == DivergenceKind::akl_r;

  SequenceLossReport report;
  report.per_token.reserve(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const Distribution p = softmax(teacher.logits_for(teacher.context_at(seq, t)));
    const LogitVector z_q = student.logits_for(student.context_at(seq, t));
    StepEval step = evaluate_divergence(divergence, p, z_q, mu);
    report.total += step.eval.value;
    if (adaptive) {
      report.per_token_weights.emplace_back(step.gaps->w_fkl, step.gaps->w_rkl);
    }
    report.per_token.push_back(std::move(step.eval));
  }
  return report;
}

struct DistillResult {
  TabularLM student;
  TrainingTrace trace;
};

/// Gradient descent on every student table row. Each row's gradient is the
/// sum of per-token gradients over all corpus positions whose student
/// context maps to that row; rows untouched by the corpus keep their initial
/// logits. Trace metrics aggregate over the distinct (teacher row, student
/// row) pairs the corpus visits, each under the teacher row's head mask at
/// cfg.mu. Snapshots are not populated (there is no single distribution to
/// snapshot).
inline DistillResult distill_sequences(const TabularLM& teacher, const TabularLM& student0,
                                       const std::vector<TokenSequence>& corpus,
                                       const TrainConfig& cfg) {
  validate(cfg);
  detail::check_vocab(teacher, student0);
  if (corpus.empty()) throw invalid_input("distill_sequences: empty corpus");
  for (const auto& seq : corpus) detail::check_sequence(seq, teacher.vocab());

  // Positions grouped as (teacher row, student row, multiplicity).
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> visited;
  for (const auto& seq : corpus) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto key = std::make_pair(teacher.context_index(teacher.context_at(seq, t)),
                                      student0.context_index(student0.context_at(seq, t)));
      ++visited[key];
    }
  }

  DistillResult result{student0, {}};
  TabularLM& student = result.student;
  const std::size_t v = teacher.vocab();
  std::vector<std::vector<double>> grad(student.row_count());

  result.trace.rows.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    for (auto& g : grad) g.clear();
    double loss = 0.0;
    double weight_sum = 0.0;
    double positions = 0.0;
    detail::SplitErrors err;
    try {
      // One divergence evaluation per distinct row pair; gradients and loss
      // are scaled by how often the pair occurs in the corpus.
      for (const auto& [key, multiplicity] : visited) {
        const auto& [p_idx, q_idx] = key;
        const Distribution p = softmax(LogitVector{teacher.row(p_idx)});
        const LogitVector z_q{student.row(q_idx)};
        const StepEval step = evaluate_divergence(cfg.divergence, p, z_q, cfg.mu, cfg.gap);
        loss += static_cast<double>(multiplicity) * step.eval.value;
        auto& g = grad[q_idx];
        if (g.empty()) g.assign(v, 0.0);
        for (std::size_t j = 0; j < v; ++j) {
          g[j] += static_cast<double>(multiplicity) * step.eval.grad_student_logits[j];
        }
        if (step.gaps) {
          weight_sum += static_cast<double>(multiplicity) * step.gaps->w_fkl;
          positions += static_cast<double>(multiplicity);
        }
        const auto pair_err =
            detail::split_errors(p, step.student, solve_head_mask(p, cfg.mu));
        err.head += pair_err.head;
        err.tail += pair_err.tail;
        err.max_abs = std::max(err.max_abs, pair_err.max_abs);
      }
    } catch (const std::exception& e) {
      throw training_failure(epoch, e.what());
    }
    if (!std::isfinite(loss)) throw training_failure(epoch, "non-finite corpus loss");

    TraceRow row;
    row.loss = loss;
    row.head_error = err.head;
    row.tail_error = err.tail;
    row.max_abs_error = err.max_abs;
    if (positions > 0.0) {
      // Position-averaged weights; per-token weights live in the
      // SequenceLossReport, a trace row carries their corpus mean.
      row.has_weights = true;
      row.w_fkl = weight_sum / positions;
      row.w_rkl = 1.0 - row.w_fkl;
    }
    result.trace.rows.push_back(row);
    if (!result.trace.converged_at && err.max_abs < cfg.convergence_tol) {
      result.trace.converged_at = epoch;
    }

    if (epoch < cfg.epochs) {
      for (std::size_t idx = 0; idx < grad.size(); ++idx) {
        if (grad[idx].empty()) continue;
        auto& row_logits = student.row(idx);
        for (std::size_t j = 0; j < v; ++j) {
          row_logits[j] -= cfg.learning_rate * grad[idx][j];
        }
      }
    }
  }
  return result;
}

}  // namespace akl
