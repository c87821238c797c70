// SPDX-License-Identifier: Apache-2.0

#include "akl/divergence.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "akl/grad_oracle.hpp"
#include "test_util.hpp"

namespace {

using akl::Distribution;
using akl::FGenerator;
using akl::LogitVector;
using akl::make_distribution;
using akl::make_logits;

// Frozen oracle values, computed with a 50-digit direct-summation oracle
// (mpmath) over the same clamped term definitions.
constexpr double kFklHalfQuarter = 0.14384103622589046;   // fkl([.5,.5], [.25,.75])
constexpr double kRklHalfQuarter = 0.13081203594113696;   // rkl([.5,.5], [.25,.75])
constexpr double kRklGradHalfQuarter = 0.20598980412527057;
constexpr double kLn2 = 0.6931471805599453;

TEST(Softmax, SymmetricAndShiftInvariantExamples) {
  const auto two = akl::softmax(make_logits({0.0, 0.0}));
  EXPECT_EQ(two.probs[0], 0.5);
  EXPECT_EQ(two.probs[1], 0.5);

  for (double c : {-7.25, 0.0, 3.5}) {
    const auto four = akl::softmax(make_logits({c, c, c, c}));
    for (double p : four.probs) EXPECT_DOUBLE_EQ(p, 0.25);
  }
}

TEST(Softmax, LogIntegerLogitsGiveRationalProbs) {
  const auto p = akl::softmax(make_logits({std::log(1.0), std::log(2.0), std::log(3.0)}));
  EXPECT_NEAR(p.probs[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(p.probs[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(p.probs[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, OrderPreservingAndNormalized) {
  std::mt19937_64 gen(11);
  for (int it = 0; it < 50; ++it) {
    const auto z = akl::test::random_logits(gen, 2 + it % 40);
    const auto p = akl::softmax(z);
    double sum = 0.0;
    for (double pj : p.probs) sum += pj;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (z.logits[i] > z.logits[j]) {
          EXPECT_GT(p.probs[i], p.probs[j]);
        }
      }
    }
  }
}

TEST(Softmax, ShiftInvariance) {
  std::mt19937_64 gen(12);
  for (double c : {-100.0, -1.5, 0.25, 42.0, 100.0}) {
    const auto z = akl::test::random_logits(gen, 16);
    auto shifted = z;
    for (auto& zj : shifted.logits) zj += c;
    const auto a = akl::softmax(z);
    const auto b = akl::softmax(shifted);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a.probs[j], b.probs[j], 1e-12);
  }
}

TEST(Softmax, RejectsNonFiniteInput) {
  EXPECT_THROW(akl::softmax(LogitVector{{0.0, std::nan("")}}), akl::invalid_input);
  EXPECT_THROW(akl::softmax(LogitVector{{0.0, INFINITY}}), akl::invalid_input);
  EXPECT_THROW(make_logits({1.0, -INFINITY}), akl::invalid_input);
}

TEST(Fkl, FrozenOracleValues) {
  const auto p = make_distribution({0.5, 0.5});
  const auto q = make_distribution({0.25, 0.75});
  EXPECT_EQ(akl::fkl(p, p), 0.0);
  EXPECT_NEAR(akl::fkl(p, q), kFklHalfQuarter, 1e-15);
  // Zero teacher mass contributes exactly nothing.
  const auto point = make_distribution({1.0, 0.0});
  const auto half = make_distribution({0.5, 0.5});
  EXPECT_NEAR(akl::fkl(point, half), kLn2, 1e-15);
}

TEST(Rkl, FrozenOracleValuesAndSymmetry) {
  const auto p = make_distribution({0.5, 0.5});
  const auto q = make_distribution({0.25, 0.75});
  EXPECT_EQ(akl::rkl(p, p), 0.0);
  EXPECT_NEAR(akl::rkl(p, q), kRklHalfQuarter, 1e-15);

  std::mt19937_64 gen(13);
  for (int it = 0; it < 30; ++it) {
    const auto a = akl::test::random_simplex(gen, 2 + it % 16);
    const auto b = akl::test::random_simplex(gen, a.size());
    EXPECT_EQ(akl::rkl(a, b), akl::fkl(b, a));
  }
}

TEST(Divergence, LengthMismatchRejected) {
  const auto p = make_distribution({0.5, 0.5});
  const auto q = make_distribution({0.25, 0.25, 0.5});
  EXPECT_THROW(akl::fkl(p, q), akl::invalid_input);
  EXPECT_THROW(akl::rkl(p, q), akl::invalid_input);
  EXPECT_THROW(akl::fkl_grad(p, make_logits({0.0, 0.0, 0.0})), akl::invalid_input);
}

TEST(FDivergence, SpecializesBitForBit) {
  std::mt19937_64 gen(14);
  for (int it = 0; it < 100; ++it) {
    const auto p = akl::test::random_simplex(gen, 2 + it % 32);
    const auto q = akl::test::random_simplex(gen, p.size());
    EXPECT_EQ(akl::f_divergence(p, q, FGenerator::forward_kl), akl::fkl(p, q));
    EXPECT_EQ(akl::f_divergence(p, q, FGenerator::reverse_kl), akl::rkl(p, q));
  }
}

TEST(FDivergence, NonnegativeOnRandomPairs) {
  std::mt19937_64 gen(15);
  for (int it = 0; it < 100; ++it) {
    const auto p = akl::test::random_simplex(gen, 2 + it % 50);
    const auto q = akl::test::random_simplex(gen, p.size());
    EXPECT_GE(akl::f_divergence(p, q, FGenerator::forward_kl), -1e-12);
    EXPECT_GE(akl::f_divergence(p, q, FGenerator::reverse_kl), -1e-12);
  }
  const auto p = akl::test::random_simplex(gen, 4);
  EXPECT_EQ(akl::f_divergence(p, p, FGenerator::forward_kl), 0.0);
  EXPECT_EQ(akl::f_divergence(p, p, FGenerator::reverse_kl), 0.0);
}

TEST(FDivergence, UnknownGeneratorRejected) {
  const auto p = make_distribution({0.5, 0.5});
  EXPECT_THROW(akl::f_divergence(p, p, static_cast<FGenerator>(99)), akl::invalid_input);
}

TEST(Fkl, ZeroIffDistributionsMatch) {
  std::mt19937_64 gen(16);
  for (int it = 0; it < 50; ++it) {
    const auto p = akl::test::random_simplex(gen, 8);
    EXPECT_EQ(akl::fkl(p, p), 0.0);

    // A visible perturbation must produce a visibly positive divergence
    // (Pinsker: fkl >= max|p-q|^2 / 2).
    auto q = p;
    const double d = 1e-4;
    q.probs[0] += d;
    q.probs[1] -= d;
    if (q.probs[1] < 0.0) continue;
    EXPECT_GE(akl::fkl(p, q), 0.9 * d * d / 2.0);
  }
}

TEST(FklGrad, FixedPointIsExactlyZero) {
  std::mt19937_64 gen(17);
  for (int it = 0; it < 100; ++it) {
    const auto z = akl::test::random_logits(gen, 2 + it % 63);
    const auto p = akl::softmax(z);
    const auto f = akl::fkl_grad(p, z);
    const auto r = akl::rkl_grad(p, z);
    EXPECT_EQ(f.value, 0.0);
    EXPECT_EQ(r.value, 0.0);
    for (std::size_t j = 0; j < z.size(); ++j) {
      EXPECT_LT(std::abs(f.grad_student_logits[j]), 1e-10);
      EXPECT_LT(std::abs(r.grad_student_logits[j]), 1e-10);
    }
  }
}

TEST(FklGrad, FrozenExample) {
  const auto p = make_distribution({0.5, 0.5});
  const auto z = make_logits({0.0, std::log(3.0)});  // softmax -> [0.25, 0.75]
  const auto ev = akl::fkl_grad(p, z);
  EXPECT_NEAR(ev.grad_student_logits[0], -0.25, 1e-14);
  EXPECT_NEAR(ev.grad_student_logits[1], 0.25, 1e-14);
  EXPECT_NEAR(ev.value, kFklHalfQuarter, 1e-15);
}

TEST(RklGrad, FrozenExample) {
  const auto p = make_distribution({0.5, 0.5});
  const auto z = make_logits({0.0, std::log(3.0)});
  const auto ev = akl::rkl_grad(p, z);
  EXPECT_NEAR(ev.grad_student_logits[0], -kRklGradHalfQuarter, 1e-14);
  EXPECT_NEAR(ev.grad_student_logits[1], kRklGradHalfQuarter, 1e-14);
  EXPECT_NEAR(ev.value, kRklHalfQuarter, 1e-15);
}

TEST(Gradients, SumToZero) {
  std::mt19937_64 gen(18);
  for (int it = 0; it < 100; ++it) {
    const auto p = akl::test::random_simplex(gen, 2 + it % 60);
    const auto z = akl::test::random_logits(gen, p.size());
    for (const auto& ev : {akl::fkl_grad(p, z), akl::rkl_grad(p, z)}) {
      double sum = 0.0;
      for (double g : ev.grad_student_logits) sum += g;
      EXPECT_NEAR(sum, 0.0, 1e-9);
    }
  }
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  std::mt19937_64 gen(19);
  for (int it = 0; it < 100; ++it) {
    const std::size_t v = (it % 3 == 0) ? 2 : (it % 3 == 1) ? 5 : 50;
    const auto p = akl::test::random_simplex(gen, v);
    const auto z = akl::test::random_logits(gen, v);
    for (auto kind : {akl::DivergenceKind::fkl, akl::DivergenceKind::rkl}) {
      const akl::DivergenceSpec spec{kind, 0.5};
      const auto analytic = akl::evaluate_divergence(spec, p, z, 0.5).eval.grad_student_logits;
      const auto fd = akl::finite_diff_grad(spec, p, z, 0.5);
      for (std::size_t j = 0; j < v; ++j) {
        const double tol = std::max(1e-5 * std::abs(analytic[j]), 1e-8);
        EXPECT_NEAR(fd[j], analytic[j], tol) << "kind " << static_cast<int>(kind) << " j " << j;
      }
    }
  }
}

TEST(Types, DistributionValidation) {
  EXPECT_THROW(make_distribution({1.0}), akl::invalid_input);
  EXPECT_THROW(make_distribution({0.5, -0.5, 1.0}), akl::invalid_input);
  EXPECT_THROW(make_distribution({0.5, 0.6}), akl::invalid_input);
  EXPECT_NO_THROW(make_distribution({0.5, 0.5 + 5e-10}));
}

}  // namespace
