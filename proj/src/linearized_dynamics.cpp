// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/linearized_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sdwave/errors.hpp"
#include "sdwave/linalg.hpp"

namespace sdwave
{

namespace
{

int step_count(double span, double dt)
{
  if (span <= 0.0)
  {
    return 0;
  }
  return std::max(1, static_cast<int>(std::ceil(span / dt * (1.0 - 1e-12))));
}

double y0_norm(const Eigen::MatrixXd &M, const EigenBasis &basis)
{
  const Eigen::VectorXd w = weights_Y0(basis);
  return linalg::weighted_norm(M, w, w);
}

void check_finite(const Eigen::MatrixXd &M, double t)
{
  if (!M.allFinite() || M.cwiseAbs().maxCoeff() > 1e100)
  {
    std::ostringstream os;
    os << "propagator blew up at t = " << t;
    throw Divergence(os.str(), t);
  }
}

}  // namespace

double potential_operator_norm(const Eigen::MatrixXd &P, const EigenBasis &basis)
{
  if (P.rows() != basis.size() || P.cols() != basis.size())
  {
    throw InvalidArgument("potential_operator_norm: size mismatch");
  }
  const Eigen::MatrixXd S = P * basis.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  return spectral_norm(S);
}

BBoundConstant fit_B_constant(const std::vector<Equilibrium> &list, const EvolutionContext &ctx)
{
  if (list.empty())
  {
    throw InvalidArgument("fit_B_constant: empty equilibrium list");
  }
  BBoundConstant b;
  for (const auto &e : list)
  {
    b.max_equilibrium_norm = std::max(b.max_equilibrium_norm, norm_Y0(e.state(), ctx.basis));
  }
  const double denom = 1.0 + std::pow(b.max_equilibrium_norm, ctx.nonlinearity.rho - 1.0);
  for (const auto &e : list)
  {
    const double n = potential_operator_norm(*equilibrium_potential_data(e, ctx).matrix, ctx.basis);
    b.c = std::max(b.c, n / denom);
  }
  return b;
}

Linearization assemble_linearization(const Equilibrium &e, double eps, double t, const EvolutionContext &ctx,
                                     const std::optional<BBoundConstant> &bound)
{
  const PotentialData pot = equilibrium_potential_data(e, ctx);
  Linearization lin{assemble_operator(ctx.basis, ctx.eta, eval_a(ctx.family, eps, t), pot.matrix),
                    potential_operator_norm(*pot.matrix, ctx.basis), std::nullopt, true};
  if (bound)
  {
    lin.B_bound = bound->c * (1.0 + std::pow(bound->max_equilibrium_norm, ctx.nonlinearity.rho - 1.0));
    lin.B_ok = lin.B_norm <= *lin.B_bound * (1.0 + 1e-12);
  }
  return lin;
}

LinearProcess::LinearProcess(EvolutionContext ctx, PotentialData potential, double eps, double dt, LinearScheme scheme)
  : ctx_(std::move(ctx)), potential_(std::move(potential)), eps_(eps), dt_(dt), scheme_(scheme)
{
  if (!(dt_ > 0.0))
  {
    throw InvalidArgument("LinearProcess: dt must be positive");
  }
  block_diagonal_ = assemble_operator(ctx_.basis, ctx_.eta, ctx_.family.value(eps_, 0.0), potential_.matrix)
                        .block_diagonal;
}

Eigen::MatrixXd LinearProcess::step_matrix(double t, double h) const
{
  double a = 0.0;
  if (scheme_ == LinearScheme::ExponentialMidpoint)
  {
    a = eval_a(ctx_.family, eps_, t + 0.5 * h);
  }
  else
  {
    // A~ is affine in a, so the trapezoidal average of A~ is A~ at the mean a
    a = 0.5 * (eval_a(ctx_.family, eps_, t) + eval_a(ctx_.family, eps_, t + h));
  }
  return matrix_semigroup(assemble_operator(ctx_.basis, ctx_.eta, a, potential_.matrix), h);
}

std::vector<Eigen::MatrixXd> LinearProcess::trajectory(double tau, double t, std::vector<Eigen::MatrixXd> *steps) const
{
  if (t < tau)
  {
    throw InvalidArgument("propagate: t must not precede tau");
  }
  const int n = step_count(t - tau, dt_);
  const int dim = dimension();
  std::vector<Eigen::MatrixXd> out{Eigen::MatrixXd::Identity(dim, dim)};
  out.reserve(n + 1);
  if (steps)
  {
    steps->clear();
    steps->reserve(n);
  }
  const double h = n ? (t - tau) / n : 0.0;
  for (int j = 0; j < n; ++j)
  {
    Eigen::MatrixXd S = step_matrix(tau + j * h, h);
    out.push_back(S * out.back());
    check_finite(out.back(), tau + (j + 1) * h);
    if (steps)
    {
      steps->push_back(std::move(S));
    }
  }
  return out;
}

const Eigen::MatrixXd &LinearProcess::propagate(double tau, double t)
{
  const auto key = std::make_pair(tau, t);
  auto it = cache_.find(key);
  if (it == cache_.end())
  {
    it = cache_.emplace(key, trajectory(tau, t).back()).first;
  }
  return it->second;
}

nlohmann::json to_json(const DichotomyData &d, double eps)
{
  nlohmann::json mult = nlohmann::json::array();
  for (const auto &m : d.multipliers)
  {
    mult.push_back({m.real(), m.imag()});
  }
  return {{"eps", eps},       {"rank_Q", d.rank_Q},           {"gap", d.spectral_gap},
          {"M", d.M_const},   {"omega", d.omega},             {"idempotent_error", d.idempotent_error},
          {"commute_error", d.commute_error}, {"worst_ratio", d.worst_ratio}, {"multipliers", mult}};
}

DichotomyData floquet_analysis(LinearProcess &process, double period, double tau, double gap_tol)
{
  if (!(period > 0.0))
  {
    throw InvalidArgument("floquet_analysis: period must be positive");
  }
  const EigenBasis &basis = process.context().basis;
  const int dim = process.dimension();
  std::vector<Eigen::MatrixXd> steps;
  const std::vector<Eigen::MatrixXd> traj = process.trajectory(tau, tau + period, &steps);
  const int n = static_cast<int>(steps.size());
  const double h = period / n;
  const Eigen::MatrixXd &mono = traj.back();

  DichotomyData d;
  d.tau = tau;
  d.period = period;
  Eigen::EigenSolver<Eigen::MatrixXd> es(mono);
  if (es.info() != Eigen::Success)
  {
    throw NumericalFailure("floquet_analysis: eigen-decomposition of the monodromy failed");
  }
  const Eigen::VectorXcd mult = es.eigenvalues();
  d.spectral_gap = INFINITY;
  double stable_max = 0.0, unstable_min = INFINITY;
  std::vector<int> unstable;
  for (int i = 0; i < dim; ++i)
  {
    const double r = std::abs(mult[i]);
    d.multipliers.push_back(mult[i]);
    d.spectral_gap = std::min(d.spectral_gap, std::abs(r - 1.0));
    if (r > 1.0)
    {
      unstable.push_back(i);
      unstable_min = std::min(unstable_min, r);
    }
    else
    {
      stable_max = std::max(stable_max, r);
    }
  }
  if (d.spectral_gap <= gap_tol)
  {
    std::ostringstream os;
    os << "Floquet multiplier within " << gap_tol << " of the unit circle (gap " << d.spectral_gap << ")";
    throw DichotomyFailure(os.str());
  }
  d.rank_Q = static_cast<int>(unstable.size());

  Eigen::MatrixXd Ur(dim, 0), Yr(0, dim);
  d.projection_Q = Eigen::MatrixXd::Zero(dim, dim);
  if (d.rank_Q > 0)
  {
    Eigen::EigenSolver<Eigen::MatrixXd> left(mono.transpose());
    std::vector<int> lu;
    for (int i = 0; i < dim; ++i)
    {
      if (std::abs(left.eigenvalues()[i]) > 1.0)
        lu.push_back(i);
    }
    if (lu.size() != unstable.size())
    {
      throw NumericalFailure("floquet_analysis: left and right unstable counts differ");
    }
    Eigen::MatrixXcd U(dim, d.rank_Q), Z(dim, d.rank_Q);
    for (int j = 0; j < d.rank_Q; ++j)
    {
      U.col(j) = es.eigenvectors().col(unstable[j]);
      Z.col(j) = left.eigenvectors().col(lu[j]);
    }
    const Eigen::MatrixXcd Qc = U * (Z.transpose() * U).partialPivLu().solve(Z.transpose());
    d.projection_Q = Qc.real();
    // real basis of the range and its dual rows: Q = Ur Yr, Yr Ur = I
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.projection_Q, Eigen::ComputeThinU);
    Ur = svd.matrixU().leftCols(d.rank_Q);
    Yr = Ur.transpose() * d.projection_Q;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  d.idempotent_error = linalg::spectral_norm_svd(Eigen::MatrixXd(d.projection_Q * d.projection_Q - d.projection_Q));
  d.commute_error = linalg::spectral_norm_svd(Eigen::MatrixXd(d.projection_Q * mono - mono * d.projection_Q)) /
                    linalg::spectral_norm_svd(mono);

  const double stable_rate = stable_max > 0.0 ? -std::log(stable_max) / period : INFINITY;
  const double unstable_rate = d.rank_Q > 0 ? std::log(unstable_min) / period : INFINITY;
  d.omega = 0.9 * std::min(stable_rate, unstable_rate);
  if (!std::isfinite(d.omega))
  {
    d.omega = 1.0;  // no spectrum on either side constrains the rate
  }

  // R[j] = Phi(tau + T, t_j)
  std::vector<Eigen::MatrixXd> R(n + 1);
  R[n] = I;
  for (int j = n - 1; j >= 0; --j)
  {
    R[j] = R[j + 1] * steps[j];
  }
  Eigen::MatrixXd Sinv;
  if (d.rank_Q > 0)
  {
    Sinv = (Yr * mono * Ur).inverse();
  }
  const Eigen::MatrixXd stable_part = I - d.projection_Q;
  // sample index over two periods: (period index, j)
  const auto bounds = [&](int per, int j) {
    const double s = per * period + j * h;
    const Eigen::MatrixXd fwd = per == 0 ? Eigen::MatrixXd(traj[j] * stable_part)
                                         : Eigen::MatrixXd(traj[j] * mono * stable_part);
    double val = y0_norm(fwd, basis);
    if (d.rank_Q > 0)
    {
      const Eigen::MatrixXd Sp = per == 0 ? Sinv : Eigen::MatrixXd(Sinv * Sinv);
      val = std::max(val, y0_norm(Eigen::MatrixXd(Ur * Sp * Yr * R[j]), basis));
    }
    return val * std::exp(d.omega * s);
  };
  std::vector<double> first(n + 1);
  d.M_const = 1.0;
  for (int j = 0; j <= n; ++j)
  {
    first[j] = bounds(0, j);
    if (j % 2 == 0 || j == n)
    {
      d.M_const = std::max(d.M_const, first[j]);
    }
  }
  d.worst_ratio = 0.0;
  for (int j = 0; j <= n; ++j)
  {
    d.worst_ratio = std::max(d.worst_ratio, first[j] / d.M_const);
    d.worst_ratio = std::max(d.worst_ratio, bounds(1, j) / d.M_const);
  }
  return d;
}

Report process_comparison(const EvolutionContext &ctx, const PotentialData &potential,
                          const std::vector<double> &eps_list, const std::vector<std::pair<double, double>> &windows,
                          double dt)
{
  Report rep;
  rep.name = "process_comparison";
  LinearProcess base(ctx, potential, 0.0, dt);
  for (auto [tau, t] : windows)
  {
    const Eigen::MatrixXd &P0 = base.propagate(tau, t);
    std::vector<double> diffs;
    for (double eps : eps_list)
    {
      LinearProcess pe(ctx, potential, eps, dt);
      diffs.push_back(y0_norm(Eigen::MatrixXd(pe.propagate(tau, t) - P0), ctx.basis));
      const double bound = diffs.size() > 1 && eps < eps_list[diffs.size() - 2] ? diffs[diffs.size() - 2] : INFINITY;
      rep.add("process_difference", diffs.back(), bound, eps == 0.0 ? diffs.back() == 0.0 : diffs.back() <= bound,
              {{"eps", eps}, {"tau", tau}, {"t", t}});
    }
    for (auto [i, j] : halving_pairs(eps_list))
    {
      const double r = diffs[j] > 0.0 ? diffs[i] / diffs[j] : (diffs[i] > 0.0 ? INFINITY : 0.0);
      const bool ok = diffs[i] == 0.0 && diffs[j] == 0.0 ? true : (r >= 1.4 && r <= 2.6);
      rep.add("process_halving_ratio", r, 2.0, ok, {{"eps", eps_list[i]}, {"tau", tau}, {"t", t}});
    }
  }
  return rep;
}

Report dichotomy_persistence_scan(const ProcessFactory &factory, const std::vector<double> &eps_grid, double period,
                                  double gap_tol)
{
  if (eps_grid.empty())
  {
    throw InvalidArgument("dichotomy_persistence_scan: empty grid");
  }
  Report rep;
  rep.name = "dichotomy_persistence";
  std::optional<DichotomyData> ref;
  std::optional<double> first_failure;
  double eps0 = NAN;
  std::vector<double> drift(eps_grid.size(), NAN);
  rep.details["table"] = nlohmann::json::array();
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
  {
    const double eps = eps_grid[i];
    LinearProcess proc = factory(eps);
    std::optional<DichotomyData> d;
    try
    {
      d = floquet_analysis(proc, period, 0.0, gap_tol);
    }
    catch (const DichotomyFailure &err)
    {
      rep.add("dichotomy", 0.0, gap_tol, false, {{"eps", eps}, {"error", err.what()}});
      if (!first_failure)
        first_failure = eps;
      continue;
    }
    if (!ref)
    {
      ref = d;
    }
    drift[i] = y0_norm(Eigen::MatrixXd(d->projection_Q - ref->projection_Q), proc.context().basis);
    const bool rank_ok = d->rank_Q == ref->rank_Q;
    const bool gap_ok = d->spectral_gap > gap_tol;
    rep.add("rank", d->rank_Q, ref->rank_Q, rank_ok, {{"eps", eps}});
    rep.add("gap", d->spectral_gap, gap_tol, gap_ok, {{"eps", eps}});
    rep.add("dichotomy_bound", d->worst_ratio, 1.1, d->worst_ratio <= 1.1,
            {{"eps", eps}, {"M", d->M_const}, {"omega", d->omega}});
    rep.add("projection_algebra", std::max(d->idempotent_error, d->commute_error), 1e-8,
            std::max(d->idempotent_error, d->commute_error) <= 1e-8, {{"eps", eps}});
    nlohmann::json row = to_json(*d, eps);
    row["projection_drift"] = drift[i];
    rep.details["table"].push_back(row);
    if (!(rank_ok && gap_ok))
    {
      if (!first_failure)
        first_failure = eps;
    }
    else if (!first_failure)
    {
      eps0 = eps;
    }
  }
  double drift_const = 0.0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
  {
    if (eps_grid[i] > 0.0 && std::isfinite(drift[i]))
      drift_const = std::max(drift_const, drift[i] / eps_grid[i]);
  }
  for (auto [i, j] : halving_pairs(eps_grid))
  {
    if (!std::isfinite(drift[i]) || !std::isfinite(drift[j]))
      continue;
    const bool ok = drift[j] < drift[i] || (drift[i] == 0.0 && drift[j] == 0.0);
    rep.add("drift_halving", drift[j], drift[i], ok, {{"eps", eps_grid[i]}, {"eps_half", eps_grid[j]}});
  }
  rep.details["eps0"] = std::isfinite(eps0) ? nlohmann::json(eps0) : nlohmann::json(nullptr);
  rep.details["first_failure"] = first_failure ? nlohmann::json(*first_failure) : nlohmann::json(nullptr);
  rep.details["drift_const"] = drift_const;
  return rep;
}

Report dichotomy_persistence_scan(const EvolutionContext &ctx, const Equilibrium &e,
                                  const std::vector<double> &eps_grid, double period, double dt, double gap_tol)
{
  const PotentialData pot = equilibrium_potential_data(e, ctx);
  return dichotomy_persistence_scan([&](double eps) { return LinearProcess(ctx, pot, eps, dt); }, eps_grid, period,
                                    gap_tol);
}

}  // namespace sdwave
