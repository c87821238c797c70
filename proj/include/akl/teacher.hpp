#pragma once
// SPDX-License-Identifier: Apache-2.0

// Teacher distributions for the toy experiments: either an explicit
// probability vector or a Gaussian mixture discretized over V bins on [0, 1].

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "akl/errors.hpp"
#include "akl/types.hpp"

namespace akl {

struct MixtureComponent {
  double center = 0.5;
  double width = 0.1;   // standard deviation of the bump
  double weight = 1.0;
};

enum class TeacherKind { gaussian_mixture_bins, explicit_probs };

struct TeacherSpec {
  TeacherKind kind = TeacherKind::gaussian_mixture_bins;
  std::size_t bins = 0;                       // V, mixture kind only
  std::vector<MixtureComponent> components;   // mixture kind only
  std::vector<double> probs;                  // explicit kind only
};

/// Evaluates the spec to a Distribution. Mixture kind: bumps are sampled at
/// bin centers x_j = j / (V - 1) and the result normalized to sum 1.
/// Explicit kind: validated passthrough.
inline Distribution build_teacher(const TeacherSpec& spec) {
  if (spec.kind == TeacherKind::explicit_probs) {
    return make_distribution(spec.probs);
  }
  if (spec.kind != TeacherKind::gaussian_mixture_bins) {
    throw invalid_input("build_teacher: unknown teacher kind");
  }
  const std::size_t v = spec.bins;
  if (v < 2) throw invalid_input("build_teacher: mixture needs at least 2 bins");
  if (spec.components.empty()) throw invalid_input("build_teacher: mixture needs components");
  double wsum = 0.0;
  for (const auto& c : spec.components) {
    if (!(c.weight > 0.0)) throw invalid_input("build_teacher: component weights must be positive");
    if (!(c.width > 0.0)) throw invalid_input("build_teacher: component widths must be positive");
    if (!std::isfinite(c.center)) throw invalid_input("build_teacher: component center not finite");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > kSimplexTol) {
    throw invalid_input("build_teacher: component weights sum to " + std::to_string(wsum) +
                        ", expected 1");
  }

  std::vector<double> probs(v, 0.0);
  double norm = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(v - 1);
    double val = 0.0;
    for (const auto& c : spec.components) {
      const double d = (x - c.center) / c.width;
      val += c.weight * std::exp(-0.5 * d * d);
    }
    probs[j] = val;
    norm += val;
  }
  if (!(norm > 0.0)) throw invalid_input("build_teacher: mixture mass vanished on all bins");
  for (double& p : probs) p /= norm;
  return Distribution{std::move(probs)};
}

}  // namespace akl
