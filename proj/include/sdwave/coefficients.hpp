// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_COEFFICIENTS_HPP
#define SDWAVE_COEFFICIENTS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdwave/report.hpp"

namespace sdwave
{

//
// Coupling coefficient a_eps(t) = base(t) + eps * perturbation(t), eps in [0, 1],
// with the constants of its standing hypotheses: a0 <= a_eps <= a1,
// |a_eps'| <= b0 and (beta, C)-Hoelder continuity, all uniform in eps.
//
struct CoefficientFamily
{
  std::string name = "custom";
  std::function<double(double)> base;
  std::function<double(double)> perturbation;
  double perturbation_sup = 1.0;  // sup_t |perturbation(t)|
  double a0_lower = 0.0;
  double a1_upper = 0.0;
  double holder_beta = 1.0;
  double holder_C = 0.0;
  double deriv_bound_b0 = 0.0;
  std::optional<double> period;

  // unchecked evaluation
  double value(double eps, double t) const { return base(t) + eps * perturbation(t); }
  // || a_eps - a_0 ||_inf
  double sup_distance(double eps) const { return eps * perturbation_sup; }
};

enum class PerturbationPreset
{
  Sine,
  Cosine,
  Zero
};

// base(t) = mean + amp sin(freq t), perturbation(t) = pert_amp * sin(pert_freq t)
// (or cos, or 0). Bounds are computed for eps in [0, 1].
struct SinusoidalParams
{
  double base_mean = 2.0;
  double base_amp = 0.5;
  double base_freq = 1.0;
  PerturbationPreset pert = PerturbationPreset::Sine;
  double pert_amp = 1.0;
  double pert_freq = 3.0;
};

CoefficientFamily sinusoidal_family(const SinusoidalParams &params = {});

// Throws HypothesisViolation if the value leaves [a0_lower, a1_upper];
// InvalidArgument if eps is outside [0, 1].
double eval_a(const CoefficientFamily &family, double eps, double t);

Report verify_coefficient_hypotheses(const CoefficientFamily &family, const std::vector<double> &eps_list,
                                     double t_begin, double t_end, double grid_step);

struct NonlinearitySpec
{
  std::string name = "custom";
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  std::function<double(double)> F;  // antiderivative with F(0) = 0
  double rho = 3.0;
  double growth_c = 3.0;
  bool odd = false;
  double mu = 0.0;  // linear coefficient of the cubic preset
};

// f(s) = mu s - s^3
NonlinearitySpec cubic_nonlinearity(double mu);
NonlinearitySpec zero_nonlinearity();
// f(s) = slope * s
NonlinearitySpec linear_nonlinearity(double slope);

inline double eval_f(const NonlinearitySpec &spec, double s) { return spec.f(s); }
inline double eval_f_prime(const NonlinearitySpec &spec, double s) { return spec.f_prime(s); }
inline double eval_F(const NonlinearitySpec &spec, double s) { return spec.F(s); }

// Samples [-range, range]. spatial_dim selects the exponent windows that only
// produce warnings.
Report verify_nonlinearity_hypotheses(const NonlinearitySpec &spec, double range, int sample_count,
                                      int spatial_dim = 3);

}  // namespace sdwave

#endif  // SDWAVE_COEFFICIENTS_HPP
