// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "sdwave/errors.hpp"

namespace sdwave
{

namespace
{

Eigen::VectorXd shifted_lambda(const EigenBasis &basis)
{
  return basis.eigenvalues().array() + 1.0;
}

double u_distance_Y0(const Eigen::VectorXd &a, const Eigen::VectorXd &b, const EigenBasis &basis)
{
  return (basis.eigenvalues().cwiseSqrt().cwiseProduct(a - b)).norm();
}

Eigen::VectorXd resize_coeffs(const Eigen::VectorXd &u, int n)
{
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  const int m = std::min<int>(n, static_cast<int>(u.size()));
  out.head(m) = u.head(m);
  return out;
}

double volume(const EigenBasis &basis)
{
  double v = 1.0;
  for (double L : basis.lengths())
  {
    v *= L;
  }
  return v;
}

}  // namespace

ModalState Equilibrium::state(double t) const
{
  ModalState s(static_cast<int>(u_star.size()), t);
  s.u() = u_star;
  return s;
}

nlohmann::json to_json(const Equilibrium &e)
{
  return {{"coeffs", std::vector<double>(e.u_star.data(), e.u_star.data() + e.u_star.size())},
          {"residual", e.residual_norm},
          {"morse_index", e.morse_index},
          {"flags", {{"elliptic_hyperbolic", e.elliptic_hyperbolic}, {"dynamic_hyperbolic", e.dynamic_hyperbolic}}},
          {"margins", {{"elliptic", e.elliptic_margin}, {"dynamic", e.dynamic_margin}}},
          {"energy", e.energy_value},
          {"newton_iterations", e.iterations}};
}

Eigen::VectorXd elliptic_residual(const Eigen::VectorXd &u, const EvolutionContext &ctx)
{
  if (u.size() != ctx.basis.size())
  {
    throw InvalidArgument("elliptic_residual: coefficient count does not match the basis");
  }
  return shifted_lambda(ctx.basis).cwiseProduct(u) - project_nonlinearity(ctx, u);
}

Eigen::MatrixXd multiplication_matrix(const Eigen::VectorXd &u, const std::function<double(double)> &g,
                                      const EvolutionContext &ctx)
{
  Eigen::VectorXd vals = synthesize(ctx.basis, u, ctx.grid);
  for (Eigen::Index i = 0; i < vals.size(); ++i)
  {
    vals[i] = g(vals[i]);
  }
  const Eigen::MatrixXd &T = ctx.grid.table();
  const Eigen::MatrixXd P = T.transpose() * (ctx.grid.weights().cwiseProduct(vals)).asDiagonal() * T;
  return 0.5 * (P + P.transpose());
}

Equilibrium newton_solve(const Eigen::VectorXd &seed, const EvolutionContext &ctx, double tol, int max_iter)
{
  Eigen::VectorXd u = seed;
  Eigen::VectorXd r = elliptic_residual(u, ctx);
  double rn = r.norm();
  int it = 0;
  while (rn > tol * (1.0 + u.norm()))
  {
    if (it >= max_iter)
    {
      throw NoConvergence("newton_solve: maximum iterations exceeded");
    }
    Eigen::MatrixXd J = -multiplication_matrix(u, ctx.nonlinearity.f_prime, ctx);
    J.diagonal() += shifted_lambda(ctx.basis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double big = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, big))
    {
      throw NearBifurcation("newton_solve: singular Jacobian at iterate");
    }
    const Eigen::VectorXd du = -es.eigenvectors() *
                               (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * r));
    double s = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h, s *= 0.5)
    {
      const Eigen::VectorXd trial = u + s * du;
      const Eigen::VectorXd rt = elliptic_residual(trial, ctx);
      if (rt.norm() < rn)
      {
        u = trial;
        r = rt;
        rn = rt.norm();
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted)
    {
      // rounding floor: no step lowers the residual any further
      if (rn <= 1e-10 * (1.0 + u.norm()))
        break;
      throw NoConvergence("newton_solve: line search failed");
    }
  }
  Equilibrium e;
  e.u_star = u;
  e.residual_norm = rn;
  e.iterations = it;
  e.energy_value = energy(e.state(), ctx);
  Eigen::MatrixXd J = -multiplication_matrix(u, ctx.nonlinearity.f_prime, ctx);
  J.diagonal() += shifted_lambda(ctx.basis);
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(J, Eigen::EigenvaluesOnly).eigenvalues();
  e.morse_index = static_cast<int>((eig.array() < 0.0).count());
  e.elliptic_margin = eig.cwiseAbs().minCoeff();
  e.elliptic_hyperbolic = e.elliptic_margin > 1e-8;
  return e;
}

std::optional<double> one_mode_amplitude(const EvolutionContext &ctx, int k)
{
  const double drive = ctx.nonlinearity.f_prime(0.0) - 1.0 - ctx.basis.lambda(k);
  if (!(drive > 0.0))
  {
    return std::nullopt;
  }
  Eigen::VectorXd e = ctx.grid.table().col(k);
  const double m4 = ctx.grid.integrate(e.array().pow(4).matrix());
  return std::sqrt(drive / m4);
}

std::vector<Equilibrium> enumerate_equilibria(const EvolutionContext &ctx, const SearchSpec &spec)
{
  const int N = ctx.basis.size();
  std::vector<Eigen::VectorXd> seeds{Eigen::VectorXd::Zero(N)};
  for (int k = 0; k < N; ++k)
  {
    if (const auto amp = one_mode_amplitude(ctx, k))
    {
      for (double sgn : {1.0, -1.0})
      {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
        s[k] = sgn * *amp;
        seeds.push_back(s);
      }
    }
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> g;
  for (int i = 0; i < spec.random_seeds; ++i)
  {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
    const int m = std::min(N, spec.random_modes);
    for (int k = 0; k < m; ++k)
    {
      s[k] = g(rng);
    }
    if (s.norm() > 0.0)
    {
      s *= spec.random_radius / s.norm();
    }
    seeds.push_back(s);
  }

  std::vector<Equilibrium> found;
  for (const auto &s : seeds)
  {
    Equilibrium e;
    try
    {
      e = newton_solve(s, ctx);
    }
    catch (const NumericalFailure &)
    {
      continue;  // random starts may stall near singular Jacobians
    }
    const bool dup = std::any_of(found.begin(), found.end(), [&](const Equilibrium &f) {
      return u_distance_Y0(f.u_star, e.u_star, ctx.basis) < spec.dedup_tol;
    });
    if (!dup)
    {
      found.push_back(std::move(e));
    }
  }
  return lyapunov_order(std::move(found));
}

double coefficient_time_mean(const CoefficientFamily &family, double eps)
{
  const double T = family.period ? *family.period : 200.0;
  const int n = family.period ? 4096 : 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
  {
    s += family.value(eps, T * (i + 0.5) / n);
  }
  return s / n;
}

Equilibrium certify_hyperbolicity(const Equilibrium &e, const CoefficientFamily &family, const EvolutionContext &ctx,
                                  double eps)
{
  Equilibrium out = e;
  Eigen::MatrixXd J = -equilibrium_potential_data(e, ctx).matrix.value();
  J.diagonal() += shifted_lambda(ctx.basis);
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(J, Eigen::EigenvaluesOnly).eigenvalues();
  out.morse_index = static_cast<int>((eig.array() < 0.0).count());
  out.elliptic_margin = eig.cwiseAbs().minCoeff();
  out.elliptic_hyperbolic = out.elliptic_margin > 1e-8;

  const PotentialData pot = equilibrium_potential_data(e, ctx);
  const OperatorAssembly op =
      assemble_operator(ctx.basis, ctx.eta, coefficient_time_mean(family, eps), pot.matrix);
  double margin = INFINITY;
  if (op.block_diagonal)
  {
    for (const auto &b : op.blocks)
    {
      Eigen::EigenSolver<Eigen::Matrix4d> es(b.entries, false);
      margin = std::min(margin, es.eigenvalues().real().cwiseAbs().minCoeff());
    }
  }
  else
  {
    Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix, false);
    margin = es.eigenvalues().real().cwiseAbs().minCoeff();
  }
  out.dynamic_margin = margin;
  out.dynamic_hyperbolic = margin >= 1e-6;
  return out;
}

std::vector<Equilibrium> lyapunov_order(std::vector<Equilibrium> list)
{
  std::stable_sort(list.begin(), list.end(),
                   [](const Equilibrium &a, const Equilibrium &b) { return a.energy_value < b.energy_value; });
  return list;
}

PotentialData equilibrium_potential_data(const Equilibrium &e, const EvolutionContext &ctx)
{
  PotentialData d;
  d.rho = ctx.nonlinearity.rho;
  const int N = ctx.basis.size();
  const double q = 2.0 * d.rho / (d.rho - 1.0);
  if (e.is_zero())
  {
    const double c = ctx.nonlinearity.f_prime(0.0);
    d.matrix = Eigen::MatrixXd(c * Eigen::MatrixXd::Identity(N, N));
    d.fprime_lq_norm = std::abs(c) * std::pow(volume(ctx.basis), 1.0 / q);
    return d;
  }
  d.matrix = multiplication_matrix(e.u_star, ctx.nonlinearity.f_prime, ctx);
  Eigen::VectorXd vals = synthesize(ctx.basis, e.u_star, ctx.grid);
  for (Eigen::Index i = 0; i < vals.size(); ++i)
  {
    vals[i] = std::pow(std::abs(ctx.nonlinearity.f_prime(vals[i])), q);
  }
  d.fprime_lq_norm = std::pow(ctx.grid.integrate(vals), 1.0 / q);
  return d;
}

Equilibrium transfer_equilibrium(const Equilibrium &e, const EvolutionContext &target)
{
  if (e.is_zero())
  {
    return newton_solve(Eigen::VectorXd::Zero(target.basis.size()), target);
  }
  return newton_solve(resize_coeffs(e.u_star, target.basis.size()), target);
}

PotentialProvider equilibrium_potential(const Equilibrium &e, const EvolutionContext &ctx)
{
  return [e, ctx](const EigenBasis &basis) {
    if (basis.same_as(ctx.basis))
    {
      return equilibrium_potential_data(e, ctx);
    }
    EvolutionContext other = make_context(basis, ctx.eta, ctx.family, ctx.nonlinearity, ctx.grid.dealias_factor());
    return equilibrium_potential_data(transfer_equilibrium(e, other), other);
  };
}

}  // namespace sdwave
