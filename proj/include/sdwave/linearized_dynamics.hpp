// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_LINEARIZED_DYNAMICS_HPP
#define SDWAVE_LINEARIZED_DYNAMICS_HPP

#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdwave/equilibria.hpp"
#include "sdwave/evolution.hpp"
#include "sdwave/operators.hpp"
#include "sdwave/report.hpp"

namespace sdwave
{

// ||B||_{L(Y0)} for B W = (0, -P u, 0, 0), i.e. || P A^{-1/2} ||_2.
double potential_operator_norm(const Eigen::MatrixXd &P, const EigenBasis &basis);

struct Linearization
{
  OperatorAssembly op;
  double B_norm = 0.0;
  // c (1 + max_i ||e_i*||_Y0^{rho - 1}) when a constant was supplied
  std::optional<double> B_bound;
  bool B_ok = true;
};

// Frozen constant of the B bound: max over the equilibria of
// ||B_i|| / (1 + max_j ||e_j*||^{rho - 1}).
struct BBoundConstant
{
  double c = 0.0;
  double max_equilibrium_norm = 0.0;
};
BBoundConstant fit_B_constant(const std::vector<Equilibrium> &list, const EvolutionContext &ctx);

Linearization assemble_linearization(const Equilibrium &e, double eps, double t, const EvolutionContext &ctx,
                                     const std::optional<BBoundConstant> &bound = std::nullopt);

enum class LinearScheme
{
  ExponentialMidpoint,  // exp(-h A~(t + h/2))
  Magnus2               // exp(-h (A~(t) + A~(t + h)) / 2)
};

//
// Fundamental matrix Phi(t, tau) of W' + A~_eps(t) W = 0 on a fixed potential,
// by products of per-step exponentials. Results are cached per (tau, t).
//
class LinearProcess
{
public:
  LinearProcess(EvolutionContext ctx, PotentialData potential, double eps, double dt,
                LinearScheme scheme = LinearScheme::ExponentialMidpoint);

  const Eigen::MatrixXd &propagate(double tau, double t);

  // Phi over one step [t, t + h]
  Eigen::MatrixXd step_matrix(double t, double h) const;
  // Phi(t_j, tau) for the uniform grid t_j = tau + j h, j = 0..n, with
  // n = ceil((t - tau) / dt); also returns the step matrices when asked.
  std::vector<Eigen::MatrixXd> trajectory(double tau, double t, std::vector<Eigen::MatrixXd> *steps = nullptr) const;

  const EvolutionContext &context() const { return ctx_; }
  const PotentialData &potential() const { return potential_; }
  double eps() const { return eps_; }
  double dt() const { return dt_; }
  bool block_diagonal() const { return block_diagonal_; }
  int dimension() const { return 4 * ctx_.basis.size(); }

private:
  EvolutionContext ctx_;
  PotentialData potential_;
  double eps_;
  double dt_;
  LinearScheme scheme_;
  bool block_diagonal_;
  std::map<std::pair<double, double>, Eigen::MatrixXd> cache_;
};

struct DichotomyData
{
  Eigen::MatrixXd projection_Q;  // unstable spectral projection at tau
  int rank_Q = 0;
  double M_const = 1.0;
  double omega = 0.0;
  double spectral_gap = 0.0;  // min | |m| - 1 | over the multipliers
  std::vector<std::complex<double>> multipliers;
  double idempotent_error = 0.0;  // || Q^2 - Q ||
  double commute_error = 0.0;     // || Q Phi - Phi Q || / || Phi ||
  double worst_ratio = 0.0;       // dichotomy bound check over two periods
  double tau = 0.0;
  double period = 0.0;
};

nlohmann::json to_json(const DichotomyData &d, double eps);

// Monodromy over [tau, tau + period], the projection onto multipliers with
// |m| > 1, omega = 0.9 * min(stable, unstable) Floquet rate, M fitted on one
// period and rechecked over two. Throws DichotomyFailure when a multiplier is
// within gap_tol of the unit circle.
DichotomyData floquet_analysis(LinearProcess &process, double period, double tau = 0.0, double gap_tol = 1e-6);

// || Phi_eps(t, tau) - Phi_0(t, tau) ||_{L(Y0)} per (tau, t) and eps. Rows
// "process_difference" and "process_halving_ratio" (within [1.4, 2.6]).
Report process_comparison(const EvolutionContext &ctx, const PotentialData &potential,
                          const std::vector<double> &eps_list, const std::vector<std::pair<double, double>> &windows,
                          double dt);

using ProcessFactory = std::function<LinearProcess(double eps)>;

// Floquet data per eps; eps0 is the largest grid value before the first one
// that loses the rank of eps_grid[0], the gap, or the dichotomy.
Report dichotomy_persistence_scan(const ProcessFactory &factory, const std::vector<double> &eps_grid, double period,
                                  double gap_tol = 1e-6);

// Scan for the linearization at e of the context's family.
Report dichotomy_persistence_scan(const EvolutionContext &ctx, const Equilibrium &e,
                                  const std::vector<double> &eps_grid, double period, double dt,
                                  double gap_tol = 1e-6);

}  // namespace sdwave

#endif  // SDWAVE_LINEARIZED_DYNAMICS_HPP
