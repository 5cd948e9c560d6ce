// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sdwave/errors.hpp"

namespace sdwave
{

namespace
{

// Smallest T > 0 with both frequencies completing whole cycles, searched over
// small cycle counts. Zero frequencies (constant terms) impose nothing.
std::optional<double> common_period(const std::vector<double> &freqs)
{
  std::vector<double> active;
  for (double w : freqs)
  {
    if (std::abs(w) > 0.0)
    {
      active.push_back(std::abs(w));
    }
  }
  if (active.empty())
  {
    return 2.0 * std::numbers::pi;
  }
  const double w0 = active.front();
  for (int n = 1; n <= 256; ++n)
  {
    const double T = 2.0 * std::numbers::pi * n / w0;
    bool ok = true;
    for (double w : active)
    {
      const double cycles = T * w / (2.0 * std::numbers::pi);
      if (std::abs(cycles - std::round(cycles)) > 1e-9 * std::max(1.0, cycles))
      {
        ok = false;
        break;
      }
    }
    if (ok)
    {
      return T;
    }
  }
  return std::nullopt;
}

}  // namespace

CoefficientFamily sinusoidal_family(const SinusoidalParams &p)
{
  if (!(std::isfinite(p.base_mean) && std::isfinite(p.base_amp) && std::isfinite(p.base_freq) &&
        std::isfinite(p.pert_amp) && std::isfinite(p.pert_freq)))
  {
    throw InvalidArgument("sinusoidal_family: non-finite parameter");
  }
  CoefficientFamily fam;
  const double mean = p.base_mean, amp = p.base_amp, w = p.base_freq;
  fam.base = [mean, amp, w](double t) { return mean + amp * std::sin(w * t); };
  double pamp = p.pert_amp;
  const double pw = p.pert_freq;
  switch (p.pert)
  {
    case PerturbationPreset::Sine:
      fam.perturbation = [pamp, pw](double t) { return pamp * std::sin(pw * t); };
      fam.name = "sinusoidal/sin";
      break;
    case PerturbationPreset::Cosine:
      fam.perturbation = [pamp, pw](double t) { return pamp * std::cos(pw * t); };
      fam.name = "sinusoidal/cos";
      break;
    case PerturbationPreset::Zero:
      pamp = 0.0;
      fam.perturbation = [](double) { return 0.0; };
      fam.name = "sinusoidal/zero";
      break;
  }
  const double base_osc = std::abs(amp);
  const double pert_sup = std::abs(pamp);
  fam.perturbation_sup = pert_sup;
  fam.a0_lower = mean - base_osc - pert_sup;
  fam.a1_upper = mean + base_osc + pert_sup;
  fam.deriv_bound_b0 = base_osc * std::abs(w) + pert_sup * std::abs(pw);
  fam.holder_beta = 1.0;
  fam.holder_C = fam.deriv_bound_b0;
  fam.period = common_period({amp != 0.0 ? w : 0.0, pamp != 0.0 ? pw : 0.0});
  if (fam.a0_lower <= 0.0)
  {
    throw InvalidArgument("sinusoidal_family: coefficient is not bounded away from zero");
  }
  return fam;
}

double eval_a(const CoefficientFamily &family, double eps, double t)
{
  if (!(eps >= 0.0 && eps <= 1.0))
  {
    throw InvalidArgument("eval_a: eps must lie in [0, 1]");
  }
  const double a = family.value(eps, t);
  if (!(a >= family.a0_lower && a <= family.a1_upper))
  {
    std::ostringstream os;
    os << "a_eps(t) = " << a << " outside [" << family.a0_lower << ", " << family.a1_upper << "] at t = " << t
       << ", eps = " << eps;
    throw HypothesisViolation(os.str(), t, eps, a);
  }
  return a;
}

Report verify_coefficient_hypotheses(const CoefficientFamily &family, const std::vector<double> &eps_list,
                                     double t_begin, double t_end, double grid_step)
{
  if (!(std::isfinite(t_begin) && std::isfinite(t_end) && t_end > t_begin && grid_step > 0.0))
  {
    throw InvalidArgument("verify_coefficient_hypotheses: invalid window");
  }
  Report rep;
  rep.name = "coefficient_hypotheses";
  const int n = static_cast<int>(std::floor((t_end - t_begin) / grid_step)) + 1;
  const double h = 1e-5;
  const double beta = family.holder_beta;
  // lags from the grid step up to the window length, geometrically spaced
  std::vector<double> lags;
  for (double lag = grid_step; lag <= t_end - t_begin; lag *= 2.0)
  {
    lags.push_back(lag);
  }
  for (double lag = grid_step / 2.0; lag > 1e-4; lag /= 4.0)
  {
    lags.push_back(lag);
  }

  for (double eps : eps_list)
  {
    const nlohmann::json par = {{"eps", eps}, {"window", {t_begin, t_end}}, {"grid_step", grid_step}};
    double amin = INFINITY, amax = -INFINITY, dmax = 0.0, hmax = 0.0, sup_diff = 0.0;
    for (int i = 0; i < n; ++i)
    {
      const double t = t_begin + i * grid_step;
      const double a = family.value(eps, t);
      amin = std::min(amin, a);
      amax = std::max(amax, a);
      const double d = (family.value(eps, t + h) - family.value(eps, t - h)) / (2.0 * h);
      dmax = std::max(dmax, std::abs(d));
      sup_diff = std::max(sup_diff, std::abs(eps * family.perturbation(t)));
      for (double lag : lags)
      {
        const double s = t + lag;
        if (s > t_end)
        {
          continue;
        }
        const double q = std::abs(a - family.value(eps, s)) / std::pow(lag, beta);
        hmax = std::max(hmax, q);
      }
    }
    // finite differences carry O(h^2) truncation and O(u/h) rounding
    const double fd_slack = 1e-6 * (1.0 + family.deriv_bound_b0);
    rep.add("a_lower", amin, family.a0_lower, amin >= family.a0_lower, par);
    rep.add("a_upper", amax, family.a1_upper, amax <= family.a1_upper, par);
    rep.add("derivative_b0", dmax, family.deriv_bound_b0, dmax <= family.deriv_bound_b0 + fd_slack, par);
    rep.add("holder_C", hmax, family.holder_C, hmax <= family.holder_C * (1.0 + 1e-12) + 1e-14, par);
    rep.add("sup_distance", sup_diff, family.sup_distance(eps), sup_diff <= family.sup_distance(eps), par);
  }
  return rep;
}

NonlinearitySpec cubic_nonlinearity(double mu)
{
  NonlinearitySpec s;
  s.name = "cubic";
  s.mu = mu;
  s.f = [mu](double x) { return mu * x - x * x * x; };
  s.f_prime = [mu](double x) { return mu - 3.0 * x * x; };
  s.F = [mu](double x) { return 0.5 * mu * x * x - 0.25 * x * x * x * x; };
  s.rho = 3.0;
  s.growth_c = std::max(std::abs(mu), 3.0);
  s.odd = true;
  return s;
}

NonlinearitySpec zero_nonlinearity()
{
  NonlinearitySpec s;
  s.name = "zero";
  s.f = [](double) { return 0.0; };
  s.f_prime = [](double) { return 0.0; };
  s.F = [](double) { return 0.0; };
  s.rho = 3.0;
  s.growth_c = 1.0;
  s.odd = true;
  return s;
}

NonlinearitySpec linear_nonlinearity(double slope)
{
  NonlinearitySpec s;
  s.name = "linear";
  s.mu = slope;
  s.f = [slope](double x) { return slope * x; };
  s.f_prime = [slope](double) { return slope; };
  s.F = [slope](double x) { return 0.5 * slope * x * x; };
  s.rho = 1.0;
  s.growth_c = std::max(std::abs(slope), 1e-300);
  s.odd = true;
  return s;
}

Report verify_nonlinearity_hypotheses(const NonlinearitySpec &spec, double range, int sample_count,
                                      int spatial_dim)
{
  if (!(range > 0.0) || sample_count < 2)
  {
    throw InvalidArgument("verify_nonlinearity_hypotheses: need range > 0 and at least 2 samples");
  }
  Report rep;
  rep.name = "nonlinearity_hypotheses";
  const nlohmann::json par = {{"range", range}, {"samples", sample_count}, {"rho", spec.rho}};
  double diss = -INFINITY, cmin = 0.0, fd_err = 0.0;
  for (int i = 0; i < sample_count; ++i)
  {
    const double s = -range + 2.0 * range * i / (sample_count - 1);
    if (std::abs(s) >= 0.9 * range)
    {
      diss = std::max(diss, spec.f(s) / s);
    }
    const double g = 1.0 + std::pow(std::abs(s), spec.rho - 1.0);
    cmin = std::max(cmin, std::abs(spec.f_prime(s)) / g);
    const double h = 1e-4 * std::max(1.0, std::abs(s));
    const double dF = (spec.F(s + h) - spec.F(s - h)) / (2.0 * h);
    fd_err = std::max(fd_err, std::abs(dF - spec.f(s)) / (1.0 + std::abs(spec.f(s))));
  }
  rep.add("dissipativeness", diss, 0.0, diss <= 0.0, par);
  rep.add("growth_c", cmin, spec.growth_c, cmin <= spec.growth_c, par);
  rep.add("antiderivative", fd_err, 1e-6, fd_err <= 1e-6, par);
  rep.add("F_at_zero", std::abs(spec.F(0.0)), 0.0, spec.F(0.0) == 0.0, par);

  if (spatial_dim >= 3)
  {
    const double N = spatial_dim;
    const double crit = (N + 2.0) / (N - 2.0);
    const double lo = (N - 1.0) / (N - 2.0), hi = N / (N - 2.0);
    if (!(spec.rho > 1.0 && spec.rho < crit))
    {
      rep.warnings.push_back("rho = " + std::to_string(spec.rho) + " outside (1, " + std::to_string(crit) +
                             ") for spatial dimension " + std::to_string(spatial_dim));
    }
    if (!(spec.rho >= lo && spec.rho < hi))
    {
      rep.warnings.push_back("rho = " + std::to_string(spec.rho) + " outside [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + ") for spatial dimension " + std::to_string(spatial_dim));
    }
  }
  return rep;
}

}  // namespace sdwave
