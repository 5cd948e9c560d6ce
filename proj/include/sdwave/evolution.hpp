// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_EVOLUTION_HPP
#define SDWAVE_EVOLUTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdwave/coefficients.hpp"
#include "sdwave/report.hpp"
#include "sdwave/spectral_domain.hpp"

namespace sdwave
{

enum class Scheme
{
  StrangExponential,
  ImexMidpoint
};

struct IntegratorConfig
{
  double dt = 1e-3;
  Scheme scheme = Scheme::StrangExponential;
  int dealias_factor = 4;
  int energy_log_stride = 1;
};

void validate(const IntegratorConfig &config);

//
// Everything the semi-discrete right-hand side needs. Read-only during runs.
//
struct EvolutionContext
{
  EigenBasis basis;
  double eta = 1.0;
  CoefficientFamily family;
  NonlinearitySpec nonlinearity;
  QuadratureGrid grid;
};

EvolutionContext make_context(const EigenBasis &basis, double eta, const CoefficientFamily &family,
                              const NonlinearitySpec &nonlinearity, int dealias_factor = 4);

// Galerkin projection P_N f(u) of the Nemytskii operator, by quadrature.
Eigen::VectorXd project_nonlinearity(const EvolutionContext &ctx, CoeffView u);

// -A_eps(t) W + F(W); F only feeds the p-component.
ModalState rhs(const ModalState &state, double t, double eps, const EvolutionContext &ctx);

// One step from t to t + dt. Throws Divergence when the Y0 norm exceeds 1e8
// and NumericalFailure on non-finite values.
ModalState step(const ModalState &state, double t, double dt, double eps, const IntegratorConfig &config,
                const EvolutionContext &ctx);

// Same, for a batch of interleaved states stored as columns. All columns share
// the time grid, so the per-mode exponentials are computed once per step.
void step_batch(Eigen::MatrixXd &states, double t, double dt, double eps, const IntegratorConfig &config,
                const EvolutionContext &ctx);

// Advances every column from tau to t_final with the step count
// ceil((t_final - tau) / dt) and a uniform step.
void advance_batch(Eigen::MatrixXd &states, double tau, double t_final, double eps, const IntegratorConfig &config,
                   const EvolutionContext &ctx);

struct TrajectoryRecord
{
  std::vector<double> times;
  std::vector<ModalState> states;
  std::vector<double> energies;
  std::vector<double> dissipation_rates;
  double eps = 0.0;
  double dt = 0.0;  // step actually used
  std::string provenance;
};

// Logs every energy_log_stride steps and always the final state.
TrajectoryRecord evolve(const ModalState &W0, double tau, double t_final, double eps, const IntegratorConfig &config,
                        const EvolutionContext &ctx);

// Final state only.
ModalState evolve_to(const ModalState &W0, double tau, double t_final, double eps, const IntegratorConfig &config,
                     const EvolutionContext &ctx);

// 1/2 (|u|^2_{X^1/2} + |u|^2_X + |p|^2_X + |v|^2_{X^1/2} + |q|^2_X) - int F(u)
double energy(const ModalState &state, const EvolutionContext &ctx);
// -eta sum_k lambda_k^1/2 (p_k^2 + q_k^2)
double dissipation_rate(const ModalState &state, const EvolutionContext &ctx);

// Contribution of the coupling terms a lambda^1/2 (q, -p) to dE/dt, which
// cancels algebraically.
double coupling_energy_contribution(const ModalState &state, double a_value, const EvolutionContext &ctx);

// Rows: "dE_dt_deviation" (central difference of E vs the logged rate),
// "energy_monotone" (largest increase between logged states),
// "coupling_cancellation" (largest |contribution| over logged states, scaled).
Report run_dissipation_audit(const TrajectoryRecord &record, const EvolutionContext &ctx);

// G(t) = |W1 - W2|^2_Y0 + |u1 - u2|^2_X
double stability_functional(const ModalState &a, const ModalState &b, const EigenBasis &basis);

// Evolves W0 under eps_pair.first and each eps of the list in eps_pair-style
// comparisons against eps = 0. Rows: "G_initial", "gronwall_envelope" (fitted
// smallest C with G <= sup|a_e1 - a_e2| e^{C (t - tau)}), "G_linear_scaling"
// per halving pair. details carry the G tables and sqrt(G) ratios.
Report stability_comparison(const ModalState &W0, double tau, double t_final, const std::vector<double> &eps_list,
                            const IntegratorConfig &config, const EvolutionContext &ctx, double ratio_t_begin = 1.0);

// G(t) for one pair of eps values over the logged grid.
std::vector<double> stability_curve(const ModalState &W0, double tau, double t_final, double eps1, double eps2,
                                    const IntegratorConfig &config, const EvolutionContext &ctx,
                                    std::vector<double> *times = nullptr);

// Runs with a_eps from tau + shift and with a_eps(shift + .) from tau, same
// data and window length. Row "translation" is the max Y0 deviation against
// tol_per_unit_time * window.
Report translation_equivariance_check(const ModalState &W0, double tau, double shift, double window, double eps,
                                      const IntegratorConfig &config, const EvolutionContext &ctx,
                                      double tol_per_unit_time = 1e-8);

// a_shift(t) = a(shift + t)
CoefficientFamily shifted_family(const CoefficientFamily &family, double shift);

// Points of the Y0 ball of the given radius supported in the leading modes,
// from a randomly rotated Halton sequence (Box-Muller directions). With
// `symmetric` every point is followed by its negative.
std::vector<ModalState> ball_samples(const EigenBasis &basis, double radius, int count, int leading_modes,
                                     std::uint64_t seed, bool symmetric = false);

// Long-run sampling of the absorbing radius. For each starting radius, the sup
// of |W(t)|^2_Y0 over [tau + t_begin, tau + t_end] among `samples` starts.
// Rows "ball_sup" per radius against the fitted R = 1.1 * max and
// "radius_independence" (spread of the per-ball sups relative to R).
Report absorbing_radius_fit(const std::vector<double> &radii, int samples, double t_begin, double t_end, double eps,
                            const IntegratorConfig &config, const EvolutionContext &ctx, std::uint64_t seed);

}  // namespace sdwave

#endif  // SDWAVE_EVOLUTION_HPP
