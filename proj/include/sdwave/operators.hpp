// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_OPERATORS_HPP
#define SDWAVE_OPERATORS_HPP

#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sdwave/coefficients.hpp"
#include "sdwave/report.hpp"
#include "sdwave/spectral_domain.hpp"

namespace sdwave
{

// Per-mode 4x4 block of the generator in (u, p, v, q) order:
//   [ 0          -1        0    0      ]
//   [ lam+1-nu   eta*s     0    a*s    ]
//   [ 0          0         0    -1     ]
//   [ 0          -a*s      lam  eta*s  ]      s = sqrt(lam)
struct ModeBlock
{
  double lambda = 0.0;
  double eta = 0.0;
  double a_value = 0.0;
  double potential_shift = 0.0;
  Eigen::Matrix4d entries;
};

ModeBlock make_mode_block(double lambda, double eta, double a_value, double potential_shift = 0.0);

//
// A 4N x 4N operator matrix in the interleaved layout together with the data
// it was built from. With no potential (or a diagonal one) the matrix is block
// diagonal and `blocks` describes it completely.
//
struct OperatorAssembly
{
  EigenBasis basis;
  double eta = 0.0;
  double a_value = 0.0;
  std::optional<Eigen::MatrixXd> potential;  // N x N Galerkin matrix of f'(u*)
  std::vector<ModeBlock> blocks;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd w0, w1;  // Y0 / Y1 similarity weights
  bool block_diagonal = true;
};

OperatorAssembly assemble_operator(const EigenBasis &basis, double eta, double a_value,
                                   const std::optional<Eigen::MatrixXd> &potential = std::nullopt);

// Block inverse of assemble_operator. Throws HyperbolicityViolation when
// A + I - P is singular.
OperatorAssembly assemble_inverse(const EigenBasis &basis, double eta, double a_value,
                                  const std::optional<Eigen::MatrixXd> &potential = std::nullopt);

// || (A + I - P)^-1 ||_{L(X)}
double elliptic_inverse_norm(const EigenBasis &basis, const std::optional<Eigen::MatrixXd> &potential);

// Largest singular value: full singular values for matrices up to 256 columns,
// power iteration beyond.
double spectral_norm(const Eigen::MatrixXd &M);

double operator_norm_Y0(const OperatorAssembly &op);
double operator_norm_Y0_to_Y1(const OperatorAssembly &op);
double operator_norm_Y0(const Eigen::MatrixXd &M, const EigenBasis &basis);
double operator_norm_Y0_to_Y1(const Eigen::MatrixXd &M, const EigenBasis &basis);

// || (mu I + M)^-1 ||_{L(Y0)}; ResolventPole if the shift is numerically singular.
double resolvent_norm(const OperatorAssembly &op, std::complex<double> mu);

// exp(-s M) by scaling and squaring (block by block when possible).
Eigen::MatrixXd matrix_semigroup(const OperatorAssembly &op, double s);

// The constant of the imaginary-axis resolvent bound,
// 1 + 2 (2 eta + 2 (a1^2 + 1) / eta + 4) + (2 a1 + 2) / eta.
double imaginary_axis_constant(double eta, double a1);

//
// Galerkin potential attached to a truncation. Providers let every estimate
// be recomputed at a refined truncation.
//
struct PotentialData
{
  std::optional<Eigen::MatrixXd> matrix;  // empty: no potential
  double fprime_lq_norm = 0.0;            // || f'(u*) ||_{L^{2 rho / (rho - 1)}}
  double rho = 3.0;
};
using PotentialProvider = std::function<PotentialData(const EigenBasis &)>;

PotentialProvider no_potential();
// f'(u*) equal to a constant, e.g. the linearization at u* = 0.
PotentialProvider constant_potential(double value, double rho = 3.0);

struct OperatorSetup
{
  EigenBasis basis;
  double eta = 1.0;
  PotentialProvider potential = no_potential();
  bool truncation_audit = false;  // also evaluate at 2N and record pairs
};

// Y0 -> Y0 operator norm of the difference between and inverse of the
// perturbed operator built for (eps, t), as used by the verifications below.
OperatorAssembly assemble_perturbed(const OperatorSetup &setup, const PotentialData &pot,
                                    const CoefficientFamily &family, double eps, double t);

// Sector {mu = vertex + r e^{i theta} : |theta| <= phi0, r >= r_min},
// r_min = max(R0, 1e-3), r up to r_min * radius_span.
struct SectorSpec
{
  double phi0 = 0.0;
  std::complex<double> vertex = 0.0;
  double R0 = 0.0;
  double radius_span = 1e6;
  double C_bound = std::numeric_limits<double>::infinity();
  std::vector<double> t_grid;
  std::vector<double> eps_grid;
  // explicit sample angles (those with |theta| <= phi0 are used); empty means
  // an even grid over [-phi0, phi0]
  std::vector<double> angles;
};

// Default angle pi/2 + arctan(1 / (4 M)) from the imaginary-axis constant.
double default_sector_angle(double eta, double a1);

using AssemblyFactory = std::function<OperatorAssembly(double eps, double t)>;

// sup over sampled mu of (1 + |mu|) || (mu + M)^-1 ||_{L(Y0)}
double sector_sup(const AssemblyFactory &factory, const SectorSpec &spec, int sample_count);

Report verify_sector_estimate(const AssemblyFactory &factory, const SectorSpec &spec, int sample_count);

// Sector report for the perturbed operator of a setup; with truncation_audit
// the sup is repeated at 2N.
Report verify_sector_estimate(const OperatorSetup &setup, const CoefficientFamily &family, const SectorSpec &spec,
                              int sample_count);

// Rows: "difference" (|| [A~_eps(t) - A~_0(t)] A~_eps^-1(tau) || vs || a_eps - a_0 ||),
// "holder" per sampled s, "product_bound" (|| A_eps(t) A_eps^-1(tau) || vs 1 + 2 a1).
Report verify_operator_difference_bound(const CoefficientFamily &family, double eps, double t, double tau,
                                        const OperatorSetup &setup, const std::vector<double> &s_samples = {});

// Rows: "inverse_difference" per eps with the bound kappa~~ || a_eps - a_0 ||,
// "inverse_halving_ratio" for each (eps, eps/2) pair.
Report verify_inverse_convergence(const CoefficientFamily &family, const std::vector<double> &eps_list, double t,
                                  const OperatorSetup &setup);

// kappa~~ = max(kappa~, lambda1^-1/2) with
// kappa~ = (1 + kappa0) lambda1^-1/2 + kappa0 || f'(u*) ||_{L^{2rho/(rho-1)}} c~ (interval embedding constant c~).
double inverse_convergence_constant(const EigenBasis &basis, const PotentialData &pot);

// Rows: "semigroup_Y0", "semigroup_Y0_Y1" per eps (sup over s_grid), halving
// ratios, and the decay fit "decay_rate" / "decay_bound" for the unperturbed
// operator frozen at t.
Report verify_semigroup_convergence(const CoefficientFamily &family, const std::vector<double> &eps_list,
                                    const std::vector<double> &s_grid, double t, const OperatorSetup &setup);

// Fitted (K, delta) with || exp(-s M) ||_{L(Y0)} <= K e^{-delta s}.
struct DecayFit
{
  double K = 0.0;
  double delta = 0.0;
  double spectral_abscissa = 0.0;  // min Re of the spectrum of M
  double worst_ratio = 0.0;        // max over the check grid of norm / (K e^{-delta s})
};
DecayFit fit_semigroup_decay(const OperatorAssembly &op, double s_max, int samples = 60);

// Pairs (i, j) of indices into eps_list with eps_j = eps_i / 2.
std::vector<std::pair<int, int>> halving_pairs(const std::vector<double> &eps_list);

// A basis with twice as many modes (same domain).
EigenBasis refined_basis(const EigenBasis &basis);

}  // namespace sdwave

#endif  // SDWAVE_OPERATORS_HPP
