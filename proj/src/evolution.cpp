// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/evolution.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sdwave/errors.hpp"
#include "sdwave/linalg.hpp"
#include "sdwave/operators.hpp"

namespace sdwave
{

namespace
{

constexpr double kBlowUp = 1e8;

using StridedConst = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<4>>;

StridedConst u_of(const Eigen::MatrixXd &X, Eigen::Index j)
{
  return StridedConst(X.col(j).data(), X.rows() / 4);
}

int step_count(double span, double dt)
{
  if (span == 0.0)
  {
    return 0;
  }
  const double n = std::ceil(span / dt * (1.0 - 1e-12));
  if (n > 1e9)
  {
    throw InvalidArgument("evolve: too many steps");
  }
  return std::max(1, static_cast<int>(n));
}

void check_state(const Eigen::MatrixXd &X, double t, const EigenBasis &basis)
{
  if (!X.allFinite())
  {
    std::ostringstream os;
    os << "non-finite state at t = " << t;
    throw NumericalFailure(os.str());
  }
  const Eigen::VectorXd w = weights_Y0(basis);
  for (Eigen::Index j = 0; j < X.cols(); ++j)
  {
    const double n = w.cwiseProduct(X.col(j)).norm();
    if (n > kBlowUp)
    {
      std::ostringstream os;
      os << "Y0 norm " << n << " exceeds " << kBlowUp << " at t = " << t;
      throw Divergence(os.str(), t);
    }
  }
}

// p-rows += h * P_N f(u), column by column
void nonlinear_kick(Eigen::MatrixXd &X, double h, const EvolutionContext &ctx)
{
  const int N = ctx.basis.size();
  for (Eigen::Index j = 0; j < X.cols(); ++j)
  {
    const Eigen::VectorXd f = project_nonlinearity(ctx, u_of(X, j));
    for (int k = 0; k < N; ++k)
    {
      X(4 * k + 1, j) += h * f[k];
    }
  }
}

Eigen::MatrixXd nonlinear_term(const Eigen::MatrixXd &X, const EvolutionContext &ctx)
{
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  const int N = ctx.basis.size();
  for (Eigen::Index j = 0; j < X.cols(); ++j)
  {
    const Eigen::VectorXd f = project_nonlinearity(ctx, u_of(X, j));
    for (int k = 0; k < N; ++k)
    {
      F(4 * k + 1, j) = f[k];
    }
  }
  return F;
}

void apply_blocks(Eigen::MatrixXd &X, const std::vector<Eigen::Matrix4d> &blocks)
{
  for (std::size_t k = 0; k < blocks.size(); ++k)
  {
    const Eigen::Index r = 4 * static_cast<Eigen::Index>(k);
    X.middleRows<4>(r) = (blocks[k] * X.middleRows<4>(r)).eval();
  }
}

std::vector<Eigen::Matrix4d> linear_flow(const EvolutionContext &ctx, double a_value, double h)
{
  std::vector<Eigen::Matrix4d> E(ctx.basis.size());
  for (int k = 0; k < ctx.basis.size(); ++k)
  {
    const Eigen::Matrix4d B = make_mode_block(ctx.basis.lambda(k), ctx.eta, a_value).entries;
    E[k] = linalg::expm(Eigen::Matrix4d(-h * B));
  }
  return E;
}

void strang_step(Eigen::MatrixXd &X, double t, double dt, double eps, const EvolutionContext &ctx)
{
  const double a1 = eval_a(ctx.family, eps, t + 0.25 * dt);
  const double a2 = eval_a(ctx.family, eps, t + 0.75 * dt);
  apply_blocks(X, linear_flow(ctx, a1, 0.5 * dt));
  // u is frozen during the nonlinear substep, so the kick is its exact flow
  nonlinear_kick(X, dt, ctx);
  apply_blocks(X, linear_flow(ctx, a2, 0.5 * dt));
}

void imex_step(Eigen::MatrixXd &X, double t, double dt, double eps, const EvolutionContext &ctx)
{
  const double a = eval_a(ctx.family, eps, t + 0.5 * dt);
  const int N = ctx.basis.size();
  std::vector<Eigen::Matrix4d> implicit(N), explicit_half(N);
  for (int k = 0; k < N; ++k)
  {
    const Eigen::Matrix4d B = make_mode_block(ctx.basis.lambda(k), ctx.eta, a).entries;
    implicit[k] = (Eigen::Matrix4d::Identity() + 0.5 * dt * B).inverse();
    explicit_half[k] = Eigen::Matrix4d::Identity() - 0.5 * dt * B;
  }
  // backward Euler half step for the stage, then Crank-Nicolson with F(stage)
  Eigen::MatrixXd stage = X + 0.5 * dt * nonlinear_term(X, ctx);
  apply_blocks(stage, implicit);
  const Eigen::MatrixXd F = nonlinear_term(stage, ctx);
  apply_blocks(X, explicit_half);
  X += dt * F;
  apply_blocks(X, implicit);
}

double halton(std::uint64_t index, int base)
{
  double f = 1.0, r = 0.0;
  while (index > 0)
  {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

std::vector<int> first_primes(int count)
{
  std::vector<int> primes;
  for (int n = 2; static_cast<int>(primes.size()) < count; ++n)
  {
    bool prime = true;
    for (int p : primes)
    {
      if (p * p > n)
        break;
      if (n % p == 0)
      {
        prime = false;
        break;
      }
    }
    if (prime)
      primes.push_back(n);
  }
  return primes;
}

}  // namespace

void validate(const IntegratorConfig &config)
{
  if (!(config.dt > 0.0) || !std::isfinite(config.dt))
  {
    throw InvalidArgument("integrator: dt must be positive");
  }
  if (config.dealias_factor < 3)
  {
    throw InvalidArgument("integrator: dealias_factor must be at least 3");
  }
  if (config.energy_log_stride < 1)
  {
    throw InvalidArgument("integrator: energy_log_stride must be at least 1");
  }
}

EvolutionContext make_context(const EigenBasis &basis, double eta, const CoefficientFamily &family,
                              const NonlinearitySpec &nonlinearity, int dealias_factor)
{
  if (!(eta > 0.0))
  {
    throw InvalidArgument("eta must be positive");
  }
  return EvolutionContext{basis, eta, family, nonlinearity, build_quadrature(basis, dealias_factor)};
}

Eigen::VectorXd project_nonlinearity(const EvolutionContext &ctx, CoeffView u)
{
  Eigen::VectorXd g = synthesize(ctx.basis, u, ctx.grid);
  for (Eigen::Index i = 0; i < g.size(); ++i)
  {
    g[i] = ctx.nonlinearity.f(g[i]);
  }
  return analyze(ctx.basis, g, ctx.grid);
}

ModalState rhs(const ModalState &state, double t, double eps, const EvolutionContext &ctx)
{
  if (state.n_modes() != ctx.basis.size())
  {
    throw InvalidArgument("rhs: state size does not match the basis");
  }
  const double a = eval_a(ctx.family, eps, t);
  ModalState d(state.n_modes(), t);
  for (int k = 0; k < ctx.basis.size(); ++k)
  {
    const Eigen::Matrix4d B = make_mode_block(ctx.basis.lambda(k), ctx.eta, a).entries;
    d.flat().segment<4>(4 * k) = -B * state.flat().segment<4>(4 * k);
  }
  d.p() += project_nonlinearity(ctx, state.u());
  if (!d.all_finite())
  {
    std::ostringstream os;
    os << "non-finite derivative at t = " << t;
    throw NumericalFailure(os.str());
  }
  return d;
}

void step_batch(Eigen::MatrixXd &states, double t, double dt, double eps, const IntegratorConfig &config,
                const EvolutionContext &ctx)
{
  if (!(dt > 0.0) || dt > config.dt * (1.0 + 1e-12))
  {
    throw InvalidArgument("step: dt must lie in (0, configured dt]");
  }
  if (states.rows() != 4 * ctx.basis.size())
  {
    throw InvalidArgument("step: state size does not match the basis");
  }
  if (config.scheme == Scheme::StrangExponential)
  {
    strang_step(states, t, dt, eps, ctx);
  }
  else
  {
    imex_step(states, t, dt, eps, ctx);
  }
  check_state(states, t + dt, ctx.basis);
}

ModalState step(const ModalState &state, double t, double dt, double eps, const IntegratorConfig &config,
                const EvolutionContext &ctx)
{
  Eigen::MatrixXd X = state.flat();
  step_batch(X, t, dt, eps, config, ctx);
  return ModalState(Eigen::VectorXd(X.col(0)), t + dt);
}

void advance_batch(Eigen::MatrixXd &states, double tau, double t_final, double eps, const IntegratorConfig &config,
                   const EvolutionContext &ctx)
{
  validate(config);
  if (t_final < tau)
  {
    throw InvalidArgument("evolve: t_final must not precede tau");
  }
  const int n = step_count(t_final - tau, config.dt);
  if (n == 0)
  {
    return;
  }
  const double h = (t_final - tau) / n;
  for (int j = 0; j < n; ++j)
  {
    step_batch(states, tau + j * h, h, eps, config, ctx);
  }
}

TrajectoryRecord evolve(const ModalState &W0, double tau, double t_final, double eps, const IntegratorConfig &config,
                        const EvolutionContext &ctx)
{
  validate(config);
  if (t_final < tau)
  {
    throw InvalidArgument("evolve: t_final must not precede tau");
  }
  if (W0.n_modes() != ctx.basis.size())
  {
    throw InvalidArgument("evolve: state size does not match the basis");
  }
  TrajectoryRecord rec;
  rec.eps = eps;
  const int n = step_count(t_final - tau, config.dt);
  const double h = n == 0 ? 0.0 : (t_final - tau) / n;
  rec.dt = h;
  const auto log = [&](const Eigen::VectorXd &x, double t) {
    ModalState s(x, t);
    rec.times.push_back(t);
    rec.energies.push_back(energy(s, ctx));
    rec.dissipation_rates.push_back(dissipation_rate(s, ctx));
    rec.states.push_back(std::move(s));
  };
  Eigen::MatrixXd X = W0.flat();
  log(X.col(0), tau);
  for (int j = 0; j < n; ++j)
  {
    step_batch(X, tau + j * h, h, eps, config, ctx);
    if ((j + 1) % config.energy_log_stride == 0 || j + 1 == n)
    {
      log(X.col(0), j + 1 == n ? t_final : tau + (j + 1) * h);
    }
  }
  return rec;
}

ModalState evolve_to(const ModalState &W0, double tau, double t_final, double eps, const IntegratorConfig &config,
                     const EvolutionContext &ctx)
{
  Eigen::MatrixXd X = W0.flat();
  advance_batch(X, tau, t_final, eps, config, ctx);
  return ModalState(Eigen::VectorXd(X.col(0)), t_final);
}

double energy(const ModalState &state, const EvolutionContext &ctx)
{
  double quad = 0.0;
  for (int k = 0; k < ctx.basis.size(); ++k)
  {
    const double lam = ctx.basis.lambda(k);
    quad += (lam + 1.0) * state.u()[k] * state.u()[k] + state.p()[k] * state.p()[k] +
            lam * state.v()[k] * state.v()[k] + state.q()[k] * state.q()[k];
  }
  Eigen::VectorXd g = synthesize(ctx.basis, state.u(), ctx.grid);
  for (Eigen::Index i = 0; i < g.size(); ++i)
  {
    g[i] = ctx.nonlinearity.F(g[i]);
  }
  return 0.5 * quad - ctx.grid.integrate(g);
}

double dissipation_rate(const ModalState &state, const EvolutionContext &ctx)
{
  double s = 0.0;
  for (int k = 0; k < ctx.basis.size(); ++k)
  {
    s += std::sqrt(ctx.basis.lambda(k)) * (state.p()[k] * state.p()[k] + state.q()[k] * state.q()[k]);
  }
  return -ctx.eta * s;
}

double coupling_energy_contribution(const ModalState &state, double a_value, const EvolutionContext &ctx)
{
  double s = 0.0;
  for (int k = 0; k < ctx.basis.size(); ++k)
  {
    const double as = a_value * std::sqrt(ctx.basis.lambda(k));
    s += state.p()[k] * (-as * state.q()[k]) + state.q()[k] * (as * state.p()[k]);
  }
  return s;
}

Report run_dissipation_audit(const TrajectoryRecord &record, const EvolutionContext &ctx)
{
  Report rep;
  rep.name = "dissipation_audit";
  const std::size_t n = record.times.size();
  double max_rate = 0.0;
  for (double d : record.dissipation_rates)
  {
    max_rate = std::max(max_rate, std::abs(d));
  }
  double worst_dev = 0.0, spacing = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
  {
    const double dt2 = record.times[i + 1] - record.times[i - 1];
    spacing = std::max(spacing, 0.5 * dt2);
    const double fd = (record.energies[i + 1] - record.energies[i - 1]) / dt2;
    worst_dev = std::max(worst_dev, std::abs(fd - record.dissipation_rates[i]));
  }
  const double dev_tol = 50.0 * spacing * spacing * (1.0 + max_rate);
  rep.add("dE_dt_deviation", worst_dev, dev_tol, worst_dev <= dev_tol,
          {{"spacing", spacing}, {"max_abs_rate", max_rate}, {"samples", n}});

  double worst_rise = -INFINITY;
  for (std::size_t i = 0; i + 1 < n; ++i)
  {
    const double rise = (record.energies[i + 1] - record.energies[i]) / (1.0 + std::abs(record.energies[i]));
    worst_rise = std::max(worst_rise, rise);
  }
  if (n < 2)
  {
    worst_rise = 0.0;
  }
  rep.add("energy_monotone", worst_rise, 1e-6, worst_rise <= 1e-6);

  double worst_cancel = 0.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    const ModalState &s = record.states[i];
    const double a = ctx.family.value(record.eps, record.times[i]);
    double scale = 0.0;
    for (int k = 0; k < ctx.basis.size(); ++k)
    {
      scale += 2.0 * std::abs(a * std::sqrt(ctx.basis.lambda(k)) * s.p()[k] * s.q()[k]);
    }
    const double c = std::abs(coupling_energy_contribution(s, a, ctx));
    worst_cancel = std::max(worst_cancel, scale > 0.0 ? c / scale : c);
  }
  const double cancel_tol = 4.0 * DBL_EPSILON;
  rep.add("coupling_cancellation", worst_cancel, cancel_tol, worst_cancel <= cancel_tol);
  rep.details["energy_initial"] = n ? record.energies.front() : 0.0;
  rep.details["energy_final"] = n ? record.energies.back() : 0.0;
  return rep;
}

double stability_functional(const ModalState &a, const ModalState &b, const EigenBasis &basis)
{
  const ModalState d(a.flat() - b.flat(), a.time);
  const double y0 = norm_Y0(d, basis);
  return y0 * y0 + d.u().squaredNorm();
}

std::vector<double> stability_curve(const ModalState &W0, double tau, double t_final, double eps1, double eps2,
                                    const IntegratorConfig &config, const EvolutionContext &ctx,
                                    std::vector<double> *times)
{
  const TrajectoryRecord r1 = evolve(W0, tau, t_final, eps1, config, ctx);
  const TrajectoryRecord r2 = eps1 == eps2 ? r1 : evolve(W0, tau, t_final, eps2, config, ctx);
  std::vector<double> G(r1.times.size());
  for (std::size_t i = 0; i < G.size(); ++i)
  {
    G[i] = stability_functional(r1.states[i], r2.states[i], ctx.basis);
  }
  if (times)
  {
    *times = r1.times;
  }
  return G;
}

Report stability_comparison(const ModalState &W0, double tau, double t_final, const std::vector<double> &eps_list,
                            const IntegratorConfig &config, const EvolutionContext &ctx, double ratio_t_begin)
{
  Report rep;
  rep.name = "stability_comparison";
  std::vector<double> times;
  std::vector<std::vector<double>> curves;
  for (double eps : eps_list)
  {
    curves.push_back(stability_curve(W0, tau, t_final, eps, 0.0, config, ctx, &times));
    const std::vector<double> &G = curves.back();
    const double sup = ctx.family.sup_distance(eps);
    rep.add("G_initial", G.front(), 0.0, G.front() == 0.0, {{"eps", eps}});
    // smallest C with G(t) <= sup e^{C (t - tau)}
    double C = 0.0;
    for (std::size_t i = 1; i < G.size(); ++i)
    {
      if (G[i] > 0.0 && sup > 0.0)
      {
        C = std::max(C, std::log(G[i] / sup) / (times[i] - tau));
      }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i)
    {
      const double env = sup * std::exp(C * (times[i] - tau));
      worst = std::max(worst, env > 0.0 ? G[i] / env : (G[i] > 0.0 ? INFINITY : 0.0));
    }
    rep.add("gronwall_envelope", worst, 1.0, worst <= 1.0 + 1e-12, {{"eps", eps}, {"C_fit", C}, {"sup_distance", sup}});
    rep.details["G"][std::to_string(eps)] = G;
    rep.details["C_fit"][std::to_string(eps)] = C;
  }
  rep.details["times"] = times;
  for (auto [i, j] : halving_pairs(eps_list))
  {
    double lo = INFINITY, hi = -INFINITY, slo = INFINITY, shi = -INFINITY;
    for (std::size_t k = 0; k < times.size(); ++k)
    {
      if (times[k] < tau + ratio_t_begin || curves[j][k] <= 0.0)
        continue;
      const double r = curves[i][k] / curves[j][k];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      slo = std::min(slo, std::sqrt(r));
      shi = std::max(shi, std::sqrt(r));
    }
    const bool both_zero = std::all_of(curves[i].begin(), curves[i].end(), [](double g) { return g == 0.0; }) &&
                           std::all_of(curves[j].begin(), curves[j].end(), [](double g) { return g == 0.0; });
    if (both_zero)
    {
      // identical trajectories: 0 = 0 / 2 holds exactly
      lo = hi = slo = shi = 2.0;
    }
    const double far = std::abs(lo - 2.0) > std::abs(hi - 2.0) ? lo : hi;
    const bool ok = lo >= 1.4 && hi <= 2.6;
    rep.add("G_linear_scaling", far, 2.0, ok,
            {{"eps", eps_list[i]}, {"eps_half", eps_list[j]}, {"ratio_min", lo}, {"ratio_max", hi},
             {"sqrtG_ratio_min", slo}, {"sqrtG_ratio_max", shi}});
  }
  return rep;
}

CoefficientFamily shifted_family(const CoefficientFamily &family, double shift)
{
  CoefficientFamily out = family;
  out.name = family.name + "_shifted";
  out.base = [b = family.base, shift](double t) { return b(shift + t); };
  out.perturbation = [p = family.perturbation, shift](double t) { return p(shift + t); };
  return out;
}

Report translation_equivariance_check(const ModalState &W0, double tau, double shift, double window, double eps,
                                      const IntegratorConfig &config, const EvolutionContext &ctx,
                                      double tol_per_unit_time)
{
  if (!(window > 0.0))
  {
    throw InvalidArgument("translation check: window must be positive");
  }
  EvolutionContext shifted = ctx;
  shifted.family = shifted_family(ctx.family, shift);
  const TrajectoryRecord direct = evolve(W0, tau + shift, tau + shift + window, eps, config, ctx);
  const TrajectoryRecord moved = evolve(W0, tau, tau + window, eps, config, shifted);
  double worst = 0.0;
  for (std::size_t i = 0; i < direct.states.size(); ++i)
  {
    const ModalState d(direct.states[i].flat() - moved.states[i].flat(), 0.0);
    worst = std::max(worst, norm_Y0(d, ctx.basis));
  }
  Report rep;
  rep.name = "translation_equivariance";
  const double tol = tol_per_unit_time * window;
  rep.add("translation", worst, tol, worst <= tol, {{"shift", shift}, {"window", window}, {"eps", eps}});
  return rep;
}

std::vector<ModalState> ball_samples(const EigenBasis &basis, double radius, int count, int leading_modes,
                                     std::uint64_t seed, bool symmetric)
{
  if (count < 0 || leading_modes < 1 || !(radius >= 0.0))
  {
    throw InvalidArgument("ball_samples: bad arguments");
  }
  const int m = std::min(leading_modes, basis.size());
  const int d = 4 * m;
  const std::vector<int> primes = first_primes(d + 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> rotation(d + 1);
  for (double &r : rotation)
  {
    r = unif(rng);
  }
  const auto coord = [&](std::uint64_t i, int dim) {
    const double x = halton(i, primes[dim]) + rotation[dim];
    return x - std::floor(x);
  };
  const Eigen::VectorXd w = weights_Y0(basis);
  std::vector<ModalState> out;
  const int base_count = symmetric ? (count + 1) / 2 : count;
  for (int s = 0; s < base_count; ++s)
  {
    const std::uint64_t idx = static_cast<std::uint64_t>(s) + 1;
    Eigen::VectorXd z(d);
    for (int c = 0; c < d; c += 2)
    {
      const double u1 = std::max(coord(idx, c), 1e-300);
      const double u2 = coord(idx, c + 1);
      const double rr = std::sqrt(-2.0 * std::log(u1));
      z[c] = rr * std::cos(2.0 * std::numbers::pi * u2);
      z[c + 1] = rr * std::sin(2.0 * std::numbers::pi * u2);
    }
    const double zn = z.norm();
    if (zn > 0.0)
    {
      z *= radius * std::pow(coord(idx, d), 1.0 / d) / zn;
    }
    ModalState st(basis.size(), 0.0);
    st.flat().head(d) = z.cwiseQuotient(w.head(d));
    out.push_back(st);
    if (symmetric && static_cast<int>(out.size()) < count)
    {
      out.push_back(ModalState(-st.flat(), 0.0));
    }
  }
  return out;
}

Report absorbing_radius_fit(const std::vector<double> &radii, int samples, double t_begin, double t_end, double eps,
                            const IntegratorConfig &config, const EvolutionContext &ctx, std::uint64_t seed)
{
  if (!(t_end > t_begin) || t_begin < 0.0 || samples < 1 || radii.empty())
  {
    throw InvalidArgument("absorbing_radius_fit: bad arguments");
  }
  validate(config);
  const Eigen::VectorXd w = weights_Y0(ctx.basis);
  std::vector<double> sups;
  for (double r : radii)
  {
    const auto pts = ball_samples(ctx.basis, r, samples, 8, seed);
    Eigen::MatrixXd X(4 * ctx.basis.size(), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t j = 0; j < pts.size(); ++j)
    {
      X.col(static_cast<Eigen::Index>(j)) = pts[j].flat();
    }
    advance_batch(X, 0.0, t_begin, eps, config, ctx);
    const int n = step_count(t_end - t_begin, config.dt);
    const double h = (t_end - t_begin) / n;
    double sup = 0.0;
    for (int j = 0; j <= n; ++j)
    {
      if (j > 0)
      {
        step_batch(X, t_begin + (j - 1) * h, h, eps, config, ctx);
      }
      sup = std::max(sup, (w.asDiagonal() * X).colwise().squaredNorm().maxCoeff());
    }
    sups.push_back(sup);
  }
  const double top = *std::max_element(sups.begin(), sups.end());
  const double low = *std::min_element(sups.begin(), sups.end());
  const double R = 1.1 * top;
  Report rep;
  rep.name = "absorbing_radius";
  for (std::size_t i = 0; i < radii.size(); ++i)
  {
    rep.add("ball_sup", sups[i], R, sups[i] <= R, {{"start_radius", radii[i]}, {"t_begin", t_begin}, {"t_end", t_end}});
  }
  const double spread = R > 0.0 ? (top - low) / R : 0.0;
  rep.add("radius_independence", spread, 0.1, spread <= 0.1);
  rep.details["R"] = R;
  return rep;
}

}  // namespace sdwave
