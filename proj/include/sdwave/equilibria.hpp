// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_EQUILIBRIA_HPP
#define SDWAVE_EQUILIBRIA_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sdwave/evolution.hpp"
#include "sdwave/operators.hpp"

namespace sdwave
{

//
// Stationary solution (u*, 0, 0, 0). The v-component vanishes identically
// since -Delta v = 0 with Dirichlet data.
//
struct Equilibrium
{
  Eigen::VectorXd u_star;
  double residual_norm = 0.0;
  int morse_index = 0;  // negative eigenvalues of the Galerkin A + I - f'(u*)
  bool elliptic_hyperbolic = false;
  bool dynamic_hyperbolic = false;
  double elliptic_margin = 0.0;  // min |eig(A + I - f'(u*))|
  double dynamic_margin = 0.0;   // min |Re eig| of the frozen linearization
  double energy_value = 0.0;
  int iterations = 0;

  ModalState state(double t = 0.0) const;
  bool is_zero() const { return u_star.cwiseAbs().maxCoeff() == 0.0; }
};

nlohmann::json to_json(const Equilibrium &e);

// (A + I) u - P_N f(u)
Eigen::VectorXd elliptic_residual(const Eigen::VectorXd &u, const EvolutionContext &ctx);

// Galerkin matrix of multiplication by g(u(x)), P_jk = int g(u) e_j e_k, by
// quadrature (symmetrized).
Eigen::MatrixXd multiplication_matrix(const Eigen::VectorXd &u, const std::function<double(double)> &g,
                                      const EvolutionContext &ctx);

// Damped Newton with a halving line search on the residual norm. Throws
// NearBifurcation on a singular Jacobian and NoConvergence after max_iter.
Equilibrium newton_solve(const Eigen::VectorXd &seed, const EvolutionContext &ctx, double tol = 1e-12,
                         int max_iter = 60);

// Amplitude of the one-mode balance c^2 int e_k^4 = f'(0) - 1 - lambda_k for
// a cubic nonlinearity, as a modal coefficient. Empty when the mode is stable.
std::optional<double> one_mode_amplitude(const EvolutionContext &ctx, int k);

struct SearchSpec
{
  int random_seeds = 16;
  double random_radius = 3.0;  // l2 size of the random modal seeds
  int random_modes = 6;
  std::uint64_t seed = 1;
  double dedup_tol = 1e-6;  // Y0 distance
};

// Seeds: 0, +-one-mode amplitude per unstable mode, then random starts.
// Returns the deduplicated list in ascending energy.
std::vector<Equilibrium> enumerate_equilibria(const EvolutionContext &ctx, const SearchSpec &spec = {});

// Time mean of a_eps over one period, or over [0, 200] without a period.
double coefficient_time_mean(const CoefficientFamily &family, double eps);

// Elliptic flag from the Galerkin A + I - f'(u*) (all |eig| > 1e-8) and the
// dynamic flag from the spectrum of the linearization with a frozen at its
// time mean (no eigenvalue with |Re| < 1e-6).
Equilibrium certify_hyperbolicity(const Equilibrium &e, const CoefficientFamily &family, const EvolutionContext &ctx,
                                  double eps = 0.0);

// Stable ascending sort by energy.
std::vector<Equilibrium> lyapunov_order(std::vector<Equilibrium> list);

// Linearization data at e: the exact f'(0) I for the zero equilibrium,
// the Galerkin matrix of f'(u*) otherwise. fprime_lq_norm uses
// q = 2 rho / (rho - 1).
PotentialData equilibrium_potential_data(const Equilibrium &e, const EvolutionContext &ctx);

// Provider for truncation audits: on another basis the equilibrium is re-solved
// by Newton from the padded (or truncated) coefficients.
PotentialProvider equilibrium_potential(const Equilibrium &e, const EvolutionContext &ctx);

// Same equilibrium on another basis (Newton re-solve).
Equilibrium transfer_equilibrium(const Equilibrium &e, const EvolutionContext &target);

}  // namespace sdwave

#endif  // SDWAVE_EQUILIBRIA_HPP
