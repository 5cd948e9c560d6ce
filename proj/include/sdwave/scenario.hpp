// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_SCENARIO_HPP
#define SDWAVE_SCENARIO_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sdwave/coefficients.hpp"
#include "sdwave/evolution.hpp"
#include "sdwave/spectral_domain.hpp"

namespace sdwave
{

struct BasisConfig
{
  DomainKind kind = DomainKind::Interval;
  int n_modes = 16;                          // interval
  std::array<int, 3> modes_per_axis{2, 2, 2};  // box
  std::vector<double> lengths{3.141592653589793};
};

struct NonlinearityConfig
{
  std::string preset = "cubic";  // cubic | zero | linear
  double mu = 2.3;
};

struct TimeWindow
{
  double tau = 0.0;
  double t_final = 10.0;
};

// Initial data for simulate and the trajectory-based estimates, as modal
// coefficients of the leading modes (missing entries are zero).
struct InitialData
{
  std::vector<double> u{0.5, 0.2};
  std::vector<double> p, v, q;
};

struct VerifyConfig
{
  double t = 1.0;             // evaluation time of the operator estimates
  int t_grid_points = 20;     // imaginary-axis sweep over the time window
  int beta_min_exp = -4;      // |beta| from 2^beta_min_exp ...
  int beta_max_exp = 12;      // ... to 2^beta_max_exp
  int beta_per_octave = 4;
  double semigroup_s_max = 2.0;
  int semigroup_s_points = 21;
  std::vector<std::pair<double, double>> process_windows{{0.0, 2.0}};
  double process_dt = 1e-2;
  double translation_shift = 1.0;
  double translation_window = 5.0;
};

struct LinearizeConfig
{
  double dt = 1e-2;
  std::vector<std::pair<double, double>> windows{{0.0, 2.0}};
};

struct DichotomyConfig
{
  double dt = 1e-2;
};

struct AttractorSettings
{
  double t = 0.0;
  double dt = 1e-2;
  int samples = 512;
  int leading_modes = 8;
  double radius = 0.0;  // <= 0: fitted
  double T0 = 1.0;
  int max_doublings = 8;
  double tol = 1e-3;
  int refine_budget = 8192;
  double horizon = 80.0;
  double manifold_depth = 128.0;
};

struct Tolerances
{
  double dichotomy_gap = 1e-6;
  double truncation_rel = 0.15;
  double hypothesis_step = 1e-2;
  double translation_per_unit_time = 1e-8;
};

struct Scenario
{
  std::string name = "default";
  BasisConfig basis;
  double eta = 1.0;
  NonlinearityConfig nonlinearity;
  SinusoidalParams coefficients;
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  TimeWindow time;
  IntegratorConfig integrator{1e-3, Scheme::StrangExponential, 4, 10};
  InitialData initial;
  VerifyConfig verify;
  LinearizeConfig linearize;
  DichotomyConfig dichotomy;
  AttractorSettings attractor;
  Tolerances tolerances;
  std::uint64_t rng_seed = 1;
  std::string output_dir = "out";
};

// YAML (JSON is a subset). Unknown keys, wrong types and out-of-range values
// throw ConfigError with the 1-based line of the offending node.
Scenario parse_scenario(const std::string &text);
Scenario load_scenario(const std::string &path);

// Canonical form; every field, defaults included.
nlohmann::json to_json(const Scenario &scenario);
// SHA-256 of the canonical form, hex.
std::string scenario_hash(const Scenario &scenario);
std::string sha256_hex(const std::string &bytes);

EigenBasis make_basis(const Scenario &scenario);
CoefficientFamily make_family(const Scenario &scenario);
NonlinearitySpec make_nonlinearity(const Scenario &scenario);
// With `refined` the basis has twice the modes (refined_basis).
EvolutionContext make_context(const Scenario &scenario, bool refined = false);
ModalState initial_state(const Scenario &scenario, const EigenBasis &basis);

// {0} and eps_list, ascending, duplicates dropped.
std::vector<double> eps_grid(const Scenario &scenario);

// Runs the coefficient checks over the time window for eps in eps_grid and
// the nonlinearity checks; throws HypothesisViolation on the first failure.
// Returns both reports.
std::vector<Report> validate_hypotheses(const Scenario &scenario);

}  // namespace sdwave

#endif  // SDWAVE_SCENARIO_HPP
