// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "sdwave/coefficients.hpp"
#include "sdwave/errors.hpp"
#include "sdwave/spectral_domain.hpp"

using namespace sdwave;

TEST(EvalA, DefaultFamilyAtZero)
{
  const auto fam = sinusoidal_family();
  EXPECT_DOUBLE_EQ(eval_a(fam, 0.25, 0.0), 2.0);
}

TEST(EvalA, ZeroEpsIsBase)
{
  const auto fam = sinusoidal_family();
  for (double t = -5.0; t < 5.0; t += 0.37)
    EXPECT_EQ(eval_a(fam, 0.0, t), fam.base(t));
}

TEST(EvalA, DenseMinimumAtHalf)
{
  const auto fam = sinusoidal_family();
  double amin = INFINITY;
  for (int i = 0; i <= 200000; ++i)
  {
    const double t = -50.0 + 100.0 * i / 200000.0;
    amin = std::min(amin, eval_a(fam, 0.5, t));
  }
  EXPECT_GE(amin, 1.0);
}

TEST(EvalA, Violations)
{
  auto fam = sinusoidal_family();
  EXPECT_THROW(eval_a(fam, 1.5, 0.0), InvalidArgument);
  EXPECT_THROW(eval_a(fam, -0.1, 0.0), InvalidArgument);
  fam.a1_upper = 2.1;
  try
  {
    eval_a(fam, 0.0, std::numbers::pi / 2);
    FAIL() << "expected HypothesisViolation";
  }
  catch (const HypothesisViolation &e)
  {
    EXPECT_DOUBLE_EQ(e.value(), 2.5);
    EXPECT_DOUBLE_EQ(e.eps(), 0.0);
    EXPECT_DOUBLE_EQ(e.t(), std::numbers::pi / 2);
  }
}

TEST(Family, DefaultConstants)
{
  const auto fam = sinusoidal_family();
  EXPECT_DOUBLE_EQ(fam.a0_lower, 0.5);
  EXPECT_DOUBLE_EQ(fam.a1_upper, 3.5);
  EXPECT_DOUBLE_EQ(fam.deriv_bound_b0, 3.5);
  ASSERT_TRUE(fam.period.has_value());
  EXPECT_NEAR(*fam.period, 2.0 * std::numbers::pi, 1e-14);
}

TEST(Family, PeriodOfMixedFrequencies)
{
  SinusoidalParams p;
  p.base_freq = 2.0;
  p.pert_freq = 3.0;
  EXPECT_NEAR(*sinusoidal_family(p).period, 2.0 * std::numbers::pi, 1e-12);
  p.base_freq = 1.0;
  p.pert_freq = std::sqrt(2.0);
  EXPECT_FALSE(sinusoidal_family(p).period.has_value());
}

TEST(VerifyCoefficients, LimitProblemPasses)
{
  auto fam = sinusoidal_family();
  fam.holder_C = 1.5;
  fam.deriv_bound_b0 = 2.0;
  const auto rep = verify_coefficient_hypotheses(fam, {0.0}, -20.0, 20.0, 0.01);
  EXPECT_TRUE(rep.all_pass()) << rep.to_json().dump(2);
  EXPECT_NEAR(rep.row("derivative_b0").measured, 0.5, 1e-6);
  EXPECT_EQ(rep.row("sup_distance").measured, 0.0);
}

TEST(VerifyCoefficients, TightConstantsFailHonestly)
{
  auto fam = sinusoidal_family();
  fam.deriv_bound_b0 = 1.0;  // true sup is 3.5 at eps = 1
  const auto rep = verify_coefficient_hypotheses(fam, {1.0}, 0.0, 10.0, 0.01);
  EXPECT_FALSE(rep.row("derivative_b0").pass);
  EXPECT_TRUE(rep.row("a_lower").pass);
}

TEST(VerifyCoefficients, ZeroPerturbation)
{
  SinusoidalParams p;
  p.pert = PerturbationPreset::Zero;
  const auto rep = verify_coefficient_hypotheses(sinusoidal_family(p), {0.0, 0.3, 1.0}, 0.0, 10.0, 0.05);
  for (const auto *r : rep.rows_with("sup_distance"))
    EXPECT_EQ(r->measured, 0.0);
  EXPECT_TRUE(rep.all_pass());
}

TEST(VerifyCoefficients, SupDistanceHalvesExactly)
{
  const auto rep = verify_coefficient_hypotheses(sinusoidal_family(), {0.4, 0.2, 0.1}, -3.0, 3.0, 0.001);
  const auto rows = rep.rows_with("sup_distance");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]->measured, 2.0 * rows[1]->measured);
  EXPECT_EQ(rows[1]->measured, 2.0 * rows[2]->measured);
  EXPECT_TRUE(rep.all_pass());
}

TEST(Nonlinearity, CubicValues)
{
  const auto f = cubic_nonlinearity(2.3);
  EXPECT_DOUBLE_EQ(eval_f(f, 1.0), 1.3);
  EXPECT_DOUBLE_EQ(eval_f_prime(f, 0.0), 2.3);
  EXPECT_DOUBLE_EQ(eval_F(f, 1.0), 0.9);
  EXPECT_EQ(eval_F(f, 0.0), 0.0);
}

TEST(Nonlinearity, AntiderivativeByQuadrature)
{
  const auto f = cubic_nonlinearity(2.3);
  for (double s : {-5.0, -2.2, -0.3, 0.7, 3.1, 5.0})
  {
    std::vector<double> x, w;
    gauss_legendre(8, 0.0, s, x, w);
    double integral = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      integral += w[i] * f.f(x[i]);
    EXPECT_NEAR(integral, f.F(s), 1e-8) << s;
  }
}

TEST(VerifyNonlinearity, CubicDissipativeAndGrowth)
{
  const auto rep = verify_nonlinearity_hypotheses(cubic_nonlinearity(2.3), 10.0, 20001);
  EXPECT_NEAR(rep.row("dissipativeness").measured, 2.3 - 81.0, 1e-9);  // |s| = 9 is the inner edge
  EXPECT_TRUE(rep.row("dissipativeness").pass);
  // sup_s |2.3 - 3 s^2| / (1 + s^2) on [-10, 10] is attained at |s| = 10
  EXPECT_NEAR(rep.row("growth_c").measured, 3.0 - 5.3 / 101.0, 1e-9);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_FALSE(rep.warnings.empty());  // rho = 3 misses [2, 3) for N = 3
}

TEST(VerifyNonlinearity, GrowthApproachesThree)
{
  const auto rep = verify_nonlinearity_hypotheses(cubic_nonlinearity(2.3), 1000.0, 20001);
  EXPECT_NEAR(rep.row("growth_c").measured, 3.0, 1e-4);
}

TEST(VerifyNonlinearity, ZeroPasses)
{
  const auto rep = verify_nonlinearity_hypotheses(zero_nonlinearity(), 10.0, 101);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.row("growth_c").measured, 0.0);
}

TEST(VerifyNonlinearity, RhoWindowWarningOnly)
{
  auto f = cubic_nonlinearity(2.3);
  f.rho = 2.5;
  const auto rep = verify_nonlinearity_hypotheses(f, 10.0, 101, 3);
  EXPECT_TRUE(rep.warnings.empty());
  const auto rep1 = verify_nonlinearity_hypotheses(cubic_nonlinearity(2.3), 10.0, 101, 1);
  EXPECT_TRUE(rep1.warnings.empty());
}
