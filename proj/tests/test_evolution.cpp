// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sdwave/errors.hpp"
#include "sdwave/evolution.hpp"
#include "sdwave/linalg.hpp"
#include "sdwave/operators.hpp"

using namespace sdwave;

namespace
{

constexpr double pi = std::numbers::pi;

EvolutionContext default_context(int N = 16, double mu = 2.3)
{
  return make_context(build_interval_basis(N, pi), 1.0, sinusoidal_family(), cubic_nonlinearity(mu));
}

CoefficientFamily constant_family(double a)
{
  SinusoidalParams p;
  p.base_mean = a;
  p.base_amp = 0.0;
  p.pert = PerturbationPreset::Zero;
  return sinusoidal_family(p);
}

ModalState default_data(int N = 16)
{
  ModalState W(N, 0.0);
  W.u()[0] = 0.5;
  W.u()[1] = 0.2;
  W.u()[2] = -0.1;
  W.p()[0] = 0.3;
  W.v()[0] = 0.2;
  W.q()[1] = -0.1;
  return W;
}

double y0_distance(const ModalState &a, const ModalState &b, const EigenBasis &basis)
{
  return norm_Y0(ModalState(a.flat() - b.flat(), 0.0), basis);
}

}  // namespace

TEST(Rhs, ZeroStateIsEquilibrium)
{
  const auto ctx = default_context();
  const ModalState d = rhs(ModalState(16, 0.0), 0.3, 0.5, ctx);
  EXPECT_EQ(d.flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rhs, SingleModeLinearPart)
{
  const auto ctx = make_context(build_interval_basis(4, pi), 1.0, sinusoidal_family(), zero_nonlinearity());
  ModalState W(4, 0.0);
  W.u()[0] = 1.0;
  const ModalState d = rhs(W, 0.0, 0.0, ctx);
  for (int i = 0; i < 16; ++i)
  {
    EXPECT_EQ(d.flat()[i], i == 1 ? -2.0 : 0.0) << i;
  }
}

TEST(Rhs, NonlinearityOnlyFeedsP)
{
  const auto ctx = default_context(8);
  ModalState W(8, 0.0);
  W.u()[0] = 0.7;
  W.u()[2] = 0.4;
  auto lin = ctx;
  lin.nonlinearity = zero_nonlinearity();
  const ModalState d = rhs(W, 0.0, 0.0, ctx);
  const ModalState d0 = rhs(W, 0.0, 0.0, lin);
  const Eigen::VectorXd diff = d.flat() - d0.flat();
  for (int k = 0; k < 8; ++k)
  {
    EXPECT_EQ(diff[4 * k], 0.0);
    EXPECT_EQ(diff[4 * k + 2], 0.0);
    EXPECT_EQ(diff[4 * k + 3], 0.0);
  }
  EXPECT_GT(diff.norm(), 0.1);
}

TEST(Step, LinearConstantCoefficientIsExact)
{
  const auto basis = build_interval_basis(1, pi);
  const auto ctx = make_context(basis, 1.0, constant_family(1.7), zero_nonlinearity());
  ModalState W(1, 0.0);
  W.flat() << 0.3, -0.2, 0.5, 0.1;
  IntegratorConfig cfg;
  cfg.dt = 0.05;
  const ModalState out = step(W, 0.0, 0.05, 0.0, cfg, ctx);
  const Eigen::Matrix4d B = make_mode_block(1.0, 1.0, 1.7).entries;
  const Eigen::Vector4d ref = linalg::expm(Eigen::Matrix4d(-0.05 * B)) * W.flat();
  EXPECT_LT((out.flat() - ref).norm(), 1e-12);
}

TEST(Step, OrderStudy)
{
  const auto ctx = default_context();
  const ModalState W0 = default_data();
  for (Scheme scheme : {Scheme::StrangExponential, Scheme::ImexMidpoint})
  {
    std::vector<ModalState> finals;
    for (double dt : {0.02, 0.01, 0.005})
    {
      IntegratorConfig cfg;
      cfg.dt = dt;
      cfg.scheme = scheme;
      finals.push_back(evolve_to(W0, 0.0, 1.0, 0.5, cfg, ctx));
    }
    const double e1 = y0_distance(finals[0], finals[1], ctx.basis);
    const double e2 = y0_distance(finals[1], finals[2], ctx.basis);
    const double order = std::log2(e1 / e2);
    EXPECT_GE(order, 1.8) << static_cast<int>(scheme);
    EXPECT_LE(order, 2.2) << static_cast<int>(scheme);
  }
}

TEST(Step, SchemesAgree)
{
  const auto ctx = default_context();
  IntegratorConfig a, b;
  a.dt = b.dt = 1e-3;
  b.scheme = Scheme::ImexMidpoint;
  const ModalState x = evolve_to(default_data(), 0.0, 1.0, 0.3, a, ctx);
  const ModalState y = evolve_to(default_data(), 0.0, 1.0, 0.3, b, ctx);
  EXPECT_LT(y0_distance(x, y, ctx.basis), 1e-4);
}

TEST(Step, RejectsOversizedStep)
{
  const auto ctx = default_context(4);
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  EXPECT_THROW(step(ModalState(4, 0.0), 0.0, 0.02, 0.0, cfg, ctx), InvalidArgument);
}

TEST(Step, BlowUpGuard)
{
  const auto ctx = make_context(build_interval_basis(4, pi), 1.0, sinusoidal_family(), linear_nonlinearity(60.0));
  ModalState W(4, 0.0);
  W.u()[0] = 1.0;
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  try
  {
    evolve_to(W, 0.0, 50.0, 0.0, cfg, ctx);
    FAIL() << "expected Divergence";
  }
  catch (const Divergence &e)
  {
    EXPECT_GT(e.t(), 0.0);
    EXPECT_LT(e.t(), 50.0);
  }
}

TEST(Evolve, ZeroLengthIsIdentity)
{
  const auto ctx = default_context();
  const ModalState W0 = default_data();
  const auto rec = evolve(W0, 1.25, 1.25, 0.2, IntegratorConfig{}, ctx);
  ASSERT_EQ(rec.states.size(), 1u);
  EXPECT_EQ(rec.states[0].flat(), W0.flat());
}

TEST(Evolve, Cocycle)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  const ModalState W0 = default_data();
  const ModalState mid = evolve_to(W0, 0.0, 1.0, 0.5, cfg, ctx);
  const ModalState two = evolve_to(mid, 1.0, 2.0, 0.5, cfg, ctx);
  const ModalState direct = evolve_to(W0, 0.0, 2.0, 0.5, cfg, ctx);
  EXPECT_LT(y0_distance(two, direct, ctx.basis), 1e-7);
}

TEST(Evolve, RecordLayout)
{
  const auto ctx = default_context(8);
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  cfg.energy_log_stride = 7;
  const auto rec = evolve(default_data(8), 0.0, 1.0, 0.0, cfg, ctx);
  ASSERT_EQ(rec.times.size(), rec.states.size());
  ASSERT_EQ(rec.times.size(), rec.energies.size());
  ASSERT_EQ(rec.times.size(), rec.dissipation_rates.size());
  EXPECT_EQ(rec.times.size(), 1u + 14u + 1u);  // 100 steps, every 7th, plus the last
  for (std::size_t i = 1; i < rec.times.size(); ++i)
  {
    EXPECT_GT(rec.times[i], rec.times[i - 1]);
  }
  EXPECT_EQ(rec.times.back(), 1.0);
}

TEST(Evolve, BatchMatchesSingle)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  const auto pts = ball_samples(ctx.basis, 2.0, 5, 8, 11);
  Eigen::MatrixXd X(64, 5);
  for (int j = 0; j < 5; ++j)
    X.col(j) = pts[j].flat();
  advance_batch(X, 0.0, 1.5, 0.1, cfg, ctx);
  for (int j = 0; j < 5; ++j)
  {
    const ModalState s = evolve_to(pts[j], 0.0, 1.5, 0.1, cfg, ctx);
    EXPECT_EQ(s.flat(), Eigen::VectorXd(X.col(j)));
  }
}

TEST(Evolve, LongRunAbsorbingRadius)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  const Report rep = absorbing_radius_fit({1.0, 3.0, 5.0}, 6, 20.0, 40.0, 0.0, cfg, ctx, 5);
  EXPECT_TRUE(rep.all_pass()) << rep.to_json().dump(2);
  EXPECT_GT(rep.details["R"].get<double>(), 0.0);
}

TEST(Evolve, ContinuityInEps)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  cfg.dt = 0.005;
  const auto base = evolve(default_data(), 0.0, 3.0, 0.0, cfg, ctx);
  double prev = INFINITY;
  for (double eps : {0.4, 0.2, 0.1, 0.05})
  {
    const auto run = evolve(default_data(), 0.0, 3.0, eps, cfg, ctx);
    double worst = 0.0;
    for (std::size_t i = 0; i < run.states.size(); ++i)
      worst = std::max(worst, y0_distance(run.states[i], base.states[i], ctx.basis));
    EXPECT_LT(worst, prev) << eps;
    prev = worst;
  }
}

TEST(Energy, Examples)
{
  const auto ctx = make_context(build_interval_basis(4, pi), 1.0, sinusoidal_family(), zero_nonlinearity());
  EXPECT_EQ(energy(ModalState(4, 0.0), default_context(4)), 0.0);
  ModalState W(4, 0.0);
  W.u()[0] = 1.0;
  EXPECT_DOUBLE_EQ(energy(W, ctx), 1.0);
  W.v()[2] = 3.0;
  EXPECT_EQ(dissipation_rate(W, ctx), 0.0);
  W.p()[1] = 1.0;
  W.q()[3] = 2.0;
  EXPECT_DOUBLE_EQ(dissipation_rate(W, ctx), -(2.0 + 4.0 * 4.0));
}

TEST(Energy, NonlinearPotentialByQuadrature)
{
  // -int F(u) for u = c e_1 and f = mu s - s^3: -(mu c^2 / 2 - 3 c^4 / (8 pi))
  const auto ctx = default_context(4);
  ModalState W(4, 0.0);
  const double c = 0.8;
  W.u()[0] = c;
  const double expected = 0.5 * 2.0 * c * c - (2.3 * c * c / 2.0 - 3.0 * std::pow(c, 4) / (8.0 * pi));
  EXPECT_NEAR(energy(W, ctx), expected, 1e-13);
}

TEST(DissipationAudit, LinearRunDecays)
{
  const auto ctx = make_context(build_interval_basis(16, pi), 1.0, sinusoidal_family(), zero_nonlinearity());
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  const auto rec = evolve(default_data(), 0.0, 3.0, 0.5, cfg, ctx);
  const Report rep = run_dissipation_audit(rec, ctx);
  EXPECT_TRUE(rep.all_pass()) << rep.to_json().dump(2);
  EXPECT_LT(rec.energies.back(), rec.energies.front());
  for (std::size_t i = 1; i < rec.energies.size(); ++i)
    EXPECT_LE(rec.energies[i], rec.energies[i - 1] + 1e-12);
}

TEST(DissipationAudit, CouplingCancellationRandomStates)
{
  const auto ctx = default_context();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial)
  {
    ModalState W(16, 0.0);
    for (int i = 0; i < 64; ++i)
      W.flat()[i] = g(rng);
    double scale = 0.0;
    for (int k = 0; k < 16; ++k)
      scale += std::abs(2.5 * (k + 1) * W.p()[k] * W.q()[k]);
    EXPECT_LE(std::abs(coupling_energy_contribution(W, 2.5, ctx)), 4.0 * DBL_EPSILON * scale);
  }
}

TEST(DissipationAudit, DefaultNonlinearRun)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  const auto rec = evolve(default_data(), 0.0, 10.0, 0.0, cfg, ctx);
  const Report rep = run_dissipation_audit(rec, ctx);
  EXPECT_TRUE(rep.all_pass()) << rep.to_json().dump(2);
  EXPECT_LT(rep.row("dE_dt_deviation").measured, 1e-4);
}

TEST(Stability, EqualEpsGivesZero)
{
  const auto ctx = default_context(8);
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  for (double G : stability_curve(default_data(8), 0.0, 2.0, 0.3, 0.3, cfg, ctx))
    EXPECT_EQ(G, 0.0);
}

TEST(Stability, EnvelopeAndScaling)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  cfg.dt = 5e-3;
  const Report rep = stability_comparison(default_data(), 0.0, 5.0, {0.1, 0.05}, cfg, ctx);
  for (const auto *r : rep.rows_with("G_initial"))
    EXPECT_EQ(r->measured, 0.0);
  for (const auto *r : rep.rows_with("gronwall_envelope"))
    EXPECT_TRUE(r->pass);
  // G is a squared distance and the distance itself is linear in eps, so the
  // halving ratio of G sits near 4 and that of sqrt(G) near 2.
  const auto &row = rep.row("G_linear_scaling");
  const double lo = row.parameters["sqrtG_ratio_min"], hi = row.parameters["sqrtG_ratio_max"];
  EXPECT_GE(lo, 1.4);
  EXPECT_LE(hi, 2.6);
  EXPECT_GE(row.parameters["ratio_min"].get<double>(), 3.0);
  EXPECT_LE(row.parameters["ratio_max"].get<double>(), 5.0);
}

TEST(Translation, ZeroShift)
{
  const auto ctx = default_context(8);
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  const Report rep = translation_equivariance_check(default_data(8), 0.0, 0.0, 2.0, 0.5, cfg, ctx);
  EXPECT_EQ(rep.row("translation").measured, 0.0);
}

TEST(Translation, PeriodShift)
{
  const auto ctx = default_context(8);
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  const Report rep = translation_equivariance_check(default_data(8), 0.0, *ctx.family.period, 3.0, 1.0, cfg, ctx);
  EXPECT_TRUE(rep.all_pass()) << rep.to_json().dump(2);
}

TEST(Translation, DefaultShift)
{
  const auto ctx = default_context();
  IntegratorConfig cfg;
  const Report rep = translation_equivariance_check(default_data(), 0.0, 1.7, 5.0, 0.0, cfg, ctx);
  EXPECT_LT(rep.row("translation").measured, 1e-7);
}

TEST(Sampling, BallSamplesInsideAndDeterministic)
{
  const auto basis = build_interval_basis(16, pi);
  const auto a = ball_samples(basis, 3.0, 64, 8, 42, true);
  const auto b = ball_samples(basis, 3.0, 64, 8, 42, true);
  ASSERT_EQ(a.size(), 64u);
  double top = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    EXPECT_EQ(a[i].flat(), b[i].flat());
    const double n = norm_Y0(a[i], basis);
    EXPECT_LE(n, 3.0 * (1.0 + 1e-12));
    top = std::max(top, n);
    EXPECT_EQ(a[i].flat().tail(32).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_GT(top, 2.4);
  for (std::size_t i = 0; i < a.size(); i += 2)
    EXPECT_EQ(a[i].flat(), -a[i + 1].flat());
  EXPECT_NE(ball_samples(basis, 3.0, 4, 8, 43)[0].flat(), a[0].flat());
}
