// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks 1-12. Prints one PASS/FAIL line per criterion and exits 0
// once every criterion has been evaluated (1 if one of them could not run).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdwave/attractor.hpp"
#include "sdwave/coefficients.hpp"
#include "sdwave/equilibria.hpp"
#include "sdwave/errors.hpp"
#include "sdwave/evolution.hpp"
#include "sdwave/linearized_dynamics.hpp"
#include "sdwave/operators.hpp"

using namespace sdwave;

namespace
{

constexpr double pi = std::numbers::pi;

struct Outcome
{
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::string fmt(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double rel(double a, double b)
{
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

double since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EvolutionContext context(double mu, int N, const CoefficientFamily &family = sinusoidal_family())
{
  return make_context(build_interval_basis(N, pi), 1.0, family, cubic_nonlinearity(mu));
}

IntegratorConfig fine_steps()
{
  IntegratorConfig c;
  c.dt = 1e-3;
  c.energy_log_stride = 1;
  return c;
}

IntegratorConfig attractor_steps()
{
  IntegratorConfig c;
  c.dt = 1e-2;
  return c;
}

ModalState default_data(int N)
{
  ModalState W(N);
  W.u()[0] = 0.5;
  W.u()[1] = 0.2;
  return W;
}

// --------------------------------------------------------------- 1

// a in [1, 2]: a1 = 2
CoefficientFamily unit_family()
{
  SinusoidalParams p;
  p.base_mean = 1.5;
  p.base_amp = 0.25;
  p.pert_amp = 0.25;
  return sinusoidal_family(p);
}

double imaginary_axis_sup(int N)
{
  const auto basis = build_interval_basis(N, pi);
  const auto fam = unit_family();
  double sup = 0.0;
  for (double eps : {0.0, 0.5, 1.0})
  {
    for (int i = 0; i < 20; ++i)
    {
      const OperatorAssembly op = assemble_operator(basis, 1.0, eval_a(fam, eps, *fam.period * i / 20.0));
      for (int j = -4 * 4; j <= 12 * 4; ++j)
      {
        const double b = std::exp2(j / 4.0);
        for (double beta : {b, -b})
        {
          sup = std::max(sup, b * resolvent_norm(op, {0.0, beta}));
        }
      }
    }
  }
  return sup;
}

Outcome criterion1(double &sup16, double &sup32)
{
  const auto t0 = std::chrono::steady_clock::now();
  const double M = imaginary_axis_constant(1.0, unit_family().a1_upper);
  const double formula = 1.0 + 2.0 * (2.0 * 1.0 + 2.0 * (2.0 * 2.0 + 1.0) / 1.0 + 4.0) + (2.0 * 2.0 + 2.0) / 1.0;
  sup16 = imaginary_axis_sup(16);
  sup32 = imaginary_axis_sup(32);
  Outcome o;
  o.seconds = since(t0);
  o.pass = M == 39.0 && formula == 39.0 && sup16 <= M && sup32 <= M && o.seconds < 60.0;
  o.detail = "M = " + fmt(M) + ", sup |beta| |(i beta + A)^-1| = " + fmt(sup16) + " (N=16), " + fmt(sup32) +
             " (N=32)";
  return o;
}

// --------------------------------------------------------------- 2

Outcome criterion2()
{
  const auto t0 = std::chrono::steady_clock::now();
  // the lambda = eta = a = 1 block inverted by hand:
  //   M = [0 -1 0 0; 2 1 0 1; 0 0 0 -1; 0 -1 1 1]
  //   -x2 = y1, -x4 = y3, 2 x1 + x2 + x4 = y2, -x2 + x3 + x4 = y4
  Eigen::Matrix4d hand;
  hand << 0.5, 0.5, 0.5, 0, -1, 0, 0, 0, -1, 0, 1, 1, 0, 0, -1, 0;
  const auto one = build_interval_basis(1, pi);
  const double worked = (Eigen::Matrix4d(assemble_inverse(one, 1.0, 1.0).matrix) - hand).cwiseAbs().maxCoeff();

  const auto basis = build_interval_basis(16, pi);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> eta_d(0.2, 3.0), a_d(0.1, 4.0), mu_d(0.0, 6.0);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(64, 64);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k)
  {
    const double eta = eta_d(rng), a = a_d(rng), mu = mu_d(rng);
    const Eigen::MatrixXd P = mu * Eigen::MatrixXd::Identity(16, 16);
    const auto A = assemble_operator(basis, eta, a, P);
    const auto Ai = assemble_inverse(basis, eta, a, P);
    worst = std::max(worst, operator_norm_Y0(Eigen::MatrixXd(A.matrix * Ai.matrix - I), basis));
  }
  Outcome o;
  o.seconds = since(t0);
  o.pass = worst < 1e-10 && worked < 1e-15 && o.seconds < 10.0;
  o.detail = "max |A A^-1 - I| = " + fmt(worst) + " over 100 draws, worked block deviation " + fmt(worked);
  return o;
}

// --------------------------------------------------------------- 3

Outcome criterion3()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto fam = sinusoidal_family();
  OperatorSetup setup{build_interval_basis(16, pi), 1.0, no_potential(), false};
  double worst = 0.0;  // measured / bound
  bool ok = true;
  int rows = 0;
  for (double eps : {0.05, 0.1, 0.2})
  {
    for (double t : {0.5, 1.0, 2.0, 4.0})
    {
      for (double tau : {0.0, 1.5})
      {
        const Report rep = verify_operator_difference_bound(fam, eps, t, tau, setup);
        const auto &row = rep.row("difference");
        ok = ok && row.measured <= row.bound;
        worst = std::max(worst, row.measured / row.bound);
        ++rows;
      }
    }
  }
  Outcome o;
  o.seconds = since(t0);
  o.pass = ok && o.seconds < 10.0;
  o.detail = "max measured / sup|a_eps - a_0| = " + fmt(worst) + " over " + std::to_string(rows) + " (eps, t, tau)";
  return o;
}

// --------------------------------------------------------------- 4

Outcome criterion4()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto fam = sinusoidal_family();
  const std::vector<double> eps{0.2, 0.1, 0.05};
  OperatorSetup setup{build_interval_basis(16, pi), 1.0, no_potential(), false};
  double lo = INFINITY, hi = -INFINITY;
  auto take = [&](const Report &rep, const std::string &id) {
    for (const auto *r : rep.rows_with(id))
    {
      lo = std::min(lo, r->measured);
      hi = std::max(hi, r->measured);
    }
  };
  std::vector<double> s_grid;
  for (int i = 0; i <= 20; ++i)
    s_grid.push_back(0.1 * i);
  for (double t : {1.0, 2.0})
  {
    take(verify_inverse_convergence(fam, eps, t, setup), "inverse_halving_ratio");
    const Report sg = verify_semigroup_convergence(fam, eps, s_grid, t, setup);
    take(sg, "semigroup_Y0_halving_ratio");
    take(sg, "semigroup_Y0_Y1_halving_ratio");
  }
  take(process_comparison(context(2.3, 16), PotentialData{}, eps, {{0.0, 2.0}}, 1e-2), "process_halving_ratio");
  Outcome o;
  o.seconds = since(t0);
  o.pass = lo >= 1.4 && hi <= 2.6 && o.seconds < 300.0;
  o.detail = "halving ratios of the inverse, semigroup and process differences in [" + fmt(lo) + ", " + fmt(hi) + "]";
  return o;
}

// --------------------------------------------------------------- 5

Outcome criterion5()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = context(2.3, 16);
  const auto rec = evolve(default_data(16), 0.0, 10.0, 0.2, fine_steps(), ctx);
  const Report rep = run_dissipation_audit(rec, ctx);
  const double dev = rep.row("dE_dt_deviation").measured;
  const double rise = rep.row("energy_monotone").measured;
  const auto &cancel = rep.row("coupling_cancellation");
  Outcome o;
  o.seconds = since(t0);
  o.pass = dev <= 1e-4 && rise <= 1e-6 && cancel.pass && o.seconds < 60.0;
  o.detail = "|dE/dt - D| = " + fmt(dev) + ", largest energy rise " + fmt(rise) + ", coupling residue " +
             fmt(cancel.measured) + " (eps = 0.2)";
  return o;
}

// --------------------------------------------------------------- 6

Outcome criterion6()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = context(2.3, 16);
  IntegratorConfig cfg = fine_steps();
  cfg.energy_log_stride = 10;
  const Report rep = stability_comparison(default_data(16), 0.0, 10.0, {0.2, 0.1, 0.05}, cfg, ctx);
  bool initial = true, envelope = true, scaling = true;
  for (const auto *r : rep.rows_with("G_initial"))
    initial = initial && r->pass;
  for (const auto *r : rep.rows_with("gronwall_envelope"))
    envelope = envelope && r->pass;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto *r : rep.rows_with("G_linear_scaling"))
  {
    scaling = scaling && r->pass;
    lo = std::min(lo, r->parameters["ratio_min"].get<double>());
    hi = std::max(hi, r->parameters["ratio_max"].get<double>());
  }
  Outcome o;
  o.seconds = since(t0);
  o.pass = initial && envelope && scaling && o.seconds < 120.0;
  o.detail = std::string("G(tau) = 0: ") + (initial ? "yes" : "no") + ", envelope: " + (envelope ? "yes" : "no") +
             ", G(eps) / G(eps/2) in [" + fmt(lo) + ", " + fmt(hi) + "] (linear scaling wants 2 +- 30%)";
  return o;
}

// --------------------------------------------------------------- 7

struct Census
{
  bool pass = true;
  std::string summary;
  std::vector<std::vector<double>> energies;  // per mu, ascending
};

Census census(int N)
{
  Census c;
  const std::vector<double> mus{1.5, 2.3, 5.5};
  const std::vector<std::vector<int>> want{{0}, {1, 0, 0}, {2, 1, 1, 0, 0}};
  for (std::size_t i = 0; i < mus.size(); ++i)
  {
    const auto list = enumerate_equilibria(context(mus[i], N));
    std::vector<int> morse;
    std::vector<double> energies;
    double worst = 0.0;
    for (const auto &e : list)
    {
      morse.push_back(e.morse_index);
      energies.push_back(e.energy_value);
      worst = std::max(worst, e.residual_norm);
    }
    std::sort(morse.rbegin(), morse.rend());
    c.pass = c.pass && morse == want[i] && worst < 1e-10;
    c.energies.push_back(energies);
    std::string m;
    for (int k : morse)
      m += (m.empty() ? "" : ",") + std::to_string(k);
    c.summary += (i ? "; " : "") + std::string("mu=") + fmt(mus[i]) + ": " + std::to_string(list.size()) + " {" + m +
                 "} res " + fmt(worst);
  }
  return c;
}

Outcome criterion7(Census &c16)
{
  const auto t0 = std::chrono::steady_clock::now();
  c16 = census(16);
  Outcome o;
  o.seconds = since(t0);
  o.pass = c16.pass && o.seconds < 30.0;
  o.detail = c16.summary;
  return o;
}

// --------------------------------------------------------------- 8

struct Persistence
{
  bool pass = false;
  std::string summary;
  double gap0 = 0.0, M0 = 0.0, omega0 = 0.0;
};

Persistence persistence(int N)
{
  Persistence p;
  const auto ctx = context(2.3, N);
  Equilibrium zero;
  for (const auto &e : enumerate_equilibria(ctx))
  {
    if (e.is_zero())
      zero = e;
  }
  zero = certify_hyperbolicity(zero, ctx.family, ctx);
  const Report rep = dichotomy_persistence_scan(ctx, zero, {0.0, 0.05, 0.1, 0.2}, *ctx.family.period, 1e-2);
  const auto &table = rep.details["table"];
  bool persist = table.size() == 4;
  for (const char *id : {"rank", "gap", "dichotomy"})
  {
    for (const auto *r : rep.rows_with(id))
      persist = persist && r->pass;
  }
  bool decays = !rep.rows_with("drift_halving").empty();
  for (const auto *r : rep.rows_with("drift_halving"))
    decays = decays && r->pass;
  const int rank0 = table.empty() ? -1 : table[0]["rank_Q"].get<int>();
  p.pass = rank0 == 1 && persist && decays;
  if (!table.empty())
  {
    p.gap0 = table[0]["gap"].get<double>();
    p.M0 = table[0]["M"].get<double>();
    p.omega0 = table[0]["omega"].get<double>();
  }
  std::string drift;
  for (const auto &row : table)
    drift += (drift.empty() ? "" : ", ") + fmt(row["projection_drift"].get<double>());
  p.summary = "rank_Q(0) = " + std::to_string(rank0) + ", rank/gap persist to eps = 0.2: " +
              (persist ? "yes" : "no") + ", gap " + fmt(p.gap0) + ", |Q_eps - Q_0| = " + drift;
  return p;
}

Outcome criterion8(Persistence &p16)
{
  const auto t0 = std::chrono::steady_clock::now();
  p16 = persistence(16);
  Outcome o;
  o.seconds = since(t0);
  o.pass = p16.pass && o.seconds < 120.0;
  o.detail = p16.summary;
  return o;
}

// --------------------------------------------------------------- 9, 10

Outcome criterion10(std::vector<AttractorSection> &sections)
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = context(2.3, 16);
  SampleSpec samples;  // identical seed for every eps
  PullbackConfig pullback;
  const Report rep = semicontinuity_sweep(0.0, {0.2, 0.1, 0.05}, samples, pullback, attractor_steps(), ctx, &sections);
  std::string up, low;
  for (const auto &row : rep.details["table"])
  {
    up += (up.empty() ? "" : ", ") + fmt(row["upper"].get<double>());
    low += (low.empty() ? "" : ", ") + fmt(row["lower"].get<double>());
  }
  bool ok = !rep.details["partial"].get<bool>();
  for (const char *id : {"upper_decay", "lower_decay", "section_converged"})
  {
    for (const auto *r : rep.rows_with(id))
      ok = ok && r->pass;
  }
  Outcome o;
  o.seconds = since(t0);
  o.pass = ok && o.seconds < 900.0;
  o.detail = "d_H(A_eps, A_0) = " + up + "; d_H(A_0, A_eps) = " + low + " for eps = 0.2, 0.1, 0.05";
  return o;
}

Outcome criterion9(const AttractorSection &section, double section_seconds)
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = context(2.3, 16);
  const auto eqs = enumerate_equilibria(ctx);
  const GradientCheck g = gradient_structure_check(section, eqs, GradientSpec{}, attractor_steps(), ctx);
  bool exact = g.graph.edges.size() == 2;
  std::vector<double> target_sign;
  for (const auto &e : g.graph.edges)
  {
    const auto &src = eqs[static_cast<std::size_t>(e.source)];
    const auto &dst = eqs[static_cast<std::size_t>(e.target)];
    exact = exact && src.is_zero() && !dst.is_zero() && dst.morse_index == 0;
    target_sign.push_back(dst.u_star[0] > 0 ? 1.0 : -1.0);
  }
  exact = exact && target_sign.size() == 2 && target_sign[0] != target_sign[1];
  const double d_union = g.report.row("manifold_union").measured;
  Outcome o;
  // the eps = 0 section comes from criterion 10; its cost is added on
  o.seconds = since(t0) + section_seconds;
  o.pass = exact && g.report.all_pass() && d_union < 5e-3 && o.seconds < 600.0;
  std::string edges;
  for (const auto &e : g.graph.edges)
    edges += (edges.empty() ? "" : ", ") + std::to_string(e.source) + "->" + std::to_string(e.target);
  o.detail = "edges {" + edges + "} (0 -> +-phi: " + (exact ? "yes" : "no") + "), d_H(section, manifolds) = " +
             fmt(d_union);
  return o;
}

// --------------------------------------------------------------- 11

Outcome criterion11()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = context(2.3, 16);
  double worst = 0.0;
  for (double shift : {0.7, 2.5})
  {
    const Report rep = translation_equivariance_check(default_data(16), 0.0, shift, 5.0, 0.2, fine_steps(), ctx);
    worst = std::max(worst, rep.row("translation").measured);
  }
  Outcome o;
  o.seconds = since(t0);
  o.pass = worst < 1e-7 && o.seconds < 30.0;
  o.detail = "max |shifted-coefficient run - shifted run|_Y0 = " + fmt(worst) + " over T = 5";
  return o;
}

// --------------------------------------------------------------- 12

Outcome criterion12(double sup16, double sup32, const Census &c16, const Persistence &p16)
{
  const auto t0 = std::chrono::steady_clock::now();
  const Census c32 = census(32);
  const Persistence p32 = persistence(32);
  double worst_energy = 0.0;
  bool same_shape = c16.energies.size() == c32.energies.size();
  for (std::size_t i = 0; same_shape && i < c16.energies.size(); ++i)
  {
    same_shape = c16.energies[i].size() == c32.energies[i].size();
    for (std::size_t k = 0; same_shape && k < c16.energies[i].size(); ++k)
    {
      if (c16.energies[i][k] != 0.0 || c32.energies[i][k] != 0.0)
        worst_energy = std::max(worst_energy, rel(c16.energies[i][k], c32.energies[i][k]));
    }
  }
  const double d1 = rel(sup16, sup32);
  const double d8 = std::max({rel(p16.gap0, p32.gap0), rel(p16.M0, p32.M0), rel(p16.omega0, p32.omega0)});
  Outcome o;
  o.seconds = since(t0);
  o.pass = sup32 <= 39.0 && c32.pass && p32.pass && same_shape && d1 <= 0.15 && worst_energy <= 0.15 && d8 <= 0.15;
  o.detail = "N=32: M-sweep " + fmt(sup32) + " (" + fmt(100 * d1) + "%), census " + (c32.pass ? "ok" : "FAILED") +
             " (energies " + fmt(100 * worst_energy) + "%), dichotomy " + (p32.pass ? "ok" : "FAILED") + " (gap/M/omega " +
             fmt(100 * d8) + "%)";
  return o;
}

}  // namespace

int main()
{
  std::vector<std::pair<int, Outcome>> results;
  bool crashed = false;
  auto guarded = [&](int id, const std::function<Outcome()> &fn) {
    Outcome o;
    try
    {
      o = fn();
    }
    catch (const std::exception &err)
    {
      o.pass = false;
      o.detail = std::string("error: ") + err.what();
      crashed = true;
    }
    std::cerr << "criterion " << id << " done in " << fmt(o.seconds) << " s" << std::endl;
    results.emplace_back(id, o);
  };

  double sup16 = NAN, sup32 = NAN;
  Census c16;
  Persistence p16;
  std::vector<AttractorSection> sections;
  guarded(1, [&] { return criterion1(sup16, sup32); });
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, [&] { return criterion7(c16); });
  guarded(8, [&] { return criterion8(p16); });
  // 10 before 9: the gradient check reuses the eps = 0 section
  double sweep_seconds = 0.0;
  guarded(10, [&] {
    Outcome o = criterion10(sections);
    sweep_seconds = o.seconds;
    return o;
  });
  guarded(9, [&] {
    if (sections.empty())
      throw NumericalFailure("no eps = 0 section");
    // charged with the whole sweep, an upper bound on the section's cost
    return criterion9(sections.front(), sweep_seconds);
  });
  guarded(11, criterion11);
  guarded(12, [&] { return criterion12(sup16, sup32, c16, p16); });

  std::sort(results.begin(), results.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
  int passed = 0;
  for (const auto &[id, o] : results)
  {
    passed += o.pass ? 1 : 0;
    std::printf("%s %2d  %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), o.seconds);
  }
  std::printf("%d/%zu criteria pass\n", passed, results.size());
  return crashed ? 1 : 0;
}
