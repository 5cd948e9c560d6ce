// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_ATTRACTOR_HPP
#define SDWAVE_ATTRACTOR_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sdwave/equilibria.hpp"
#include "sdwave/evolution.hpp"
#include "sdwave/report.hpp"

namespace sdwave
{

struct SampleSpec
{
  double radius = 0.0;  // <= 0: fitted absorbing radius
  int count = 512;
  int leading_modes = 8;
  std::uint64_t seed = 1;
  bool symmetric = true;
};

struct PullbackConfig
{
  double T0 = 1.0;
  int max_doublings = 8;  // deepest pullback is T0 * 2^max_doublings
  double tol = 1e-3;      // Cauchy tolerance on d_H, Y0 metric
  double spacing = 0.0;   // image resolution of the refinement; <= 0 means tol
  int refine_budget = 8192;
  int jobs = 1;
};

//
// Point cloud for A_eps(t). Besides the images of the ball samples, the cloud
// holds images of bisected segments between consecutive samples, added until
// neighbouring images are within `spacing`; this is what resolves the
// connecting orbits, which plain sampling misses with probability one.
//
struct AttractorSection
{
  double time = 0.0;
  double eps = 0.0;
  std::vector<ModalState> points;
  std::vector<double> pullback_depths;
  std::vector<double> cauchy_history;  // d_H between successive depths
  double cauchy_gap = 0.0;
  double absorbing_radius = 0.0;
  bool converged = false;
  bool refinement_truncated = false;  // budget hit at the final depth
  int sample_count = 0;

  // Points as columns.
  Eigen::MatrixXd matrix() const;
};

nlohmann::json manifest_json(const AttractorSection &section);
// Header "index,u_0,p_0,v_0,q_0,u_1,...", one row per point.
void write_section_csv(std::ostream &os, const AttractorSection &section);

// Absorbing radius from long runs started on balls of radius 1, 3, 5.
double fitted_absorbing_radius(double eps, const IntegratorConfig &config, const EvolutionContext &ctx,
                               std::uint64_t seed = 1);

// Depths T0 2^j, j = 0, 1, ..., until the Cauchy gap drops below tol or the
// cap is reached. An unconverged section is returned with converged = false.
AttractorSection pullback_iterate(double t, double eps, const SampleSpec &samples, const PullbackConfig &pullback,
                                  const IntegratorConfig &config, const EvolutionContext &ctx);

struct FanSpec
{
  double delta = 0.0;   // <= 0: 1e-4 (1 + |e*|_Y0)
  int directions = 8;   // rays in the unstable subspace when its rank is > 1
  double spacing = 1e-3;
  int budget = 4096;    // refined points per ray
  std::uint64_t seed = 1;
};

struct ManifoldCloud
{
  int rank = 0;
  double delta = 0.0;
  std::vector<ModalState> points;  // points[0] is the image of e* itself
  std::vector<int> branch;         // ray index per point, -1 for e*
  bool truncated = false;
};

// Seeds e* + s delta d, s in [0, 1], along unit rays d of the unstable range
// of Q(t - depth), evolves them to t and refines in s. With a periodic
// coefficient Q comes from the monodromy, otherwise from the spectrum at the
// mean coefficient. Throws InvalidArgument when e* is not hyperbolic.
ManifoldCloud grow_unstable_manifold(const Equilibrium &e, double eps, double t, double depth, const FanSpec &fan,
                                     const IntegratorConfig &config, const EvolutionContext &ctx);

// sup_{a in A} inf_{b in B} |a - b|_Y0, by brute force over the pairs.
double hausdorff_semidistance(const std::vector<ModalState> &A, const std::vector<ModalState> &B,
                              const EvolutionContext &ctx);
double hausdorff_distance(const std::vector<ModalState> &A, const std::vector<ModalState> &B,
                          const EvolutionContext &ctx);
// Same on Y0-weighted columns.
double hausdorff_semidistance_weighted(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B);

// Sections for eps = 0 and every eps of the list from identical samples.
// Columns d_H(A_eps, A_0) ("upper_distance") and d_H(A_0, A_eps)
// ("lower_distance", evidence only) against sup |a_eps - a_0|, and rows
// "upper_decay" / "lower_decay" per halving pair with a 20% allowance. Any
// unconverged section marks the report partial.
Report semicontinuity_sweep(double t, const std::vector<double> &eps_list, const SampleSpec &samples,
                            const PullbackConfig &pullback, const IntegratorConfig &config, const EvolutionContext &ctx,
                            std::vector<AttractorSection> *sections = nullptr);

struct ConnectionEdge
{
  int source = -1;  // indices into ConnectionGraph::nodes
  int target = -1;
  int witness_count = 0;
  int witness_point = -1;       // section index of the first witness
  double max_energy_rise = 0.0; // over every witness
  double arrival_time = 0.0;    // first witness time to enter the target ball
};

struct ConnectionGraph
{
  std::vector<Equilibrium> nodes;
  std::vector<ConnectionEdge> edges;

  bool has_edge(int source, int target) const;
};

nlohmann::json to_json(const ConnectionGraph &graph);

struct GradientSpec
{
  double horizon = 80.0;
  double match_tol = 1e-2;
  double energy_slack = 1e-6;
  double log_interval = 0.05;
  int max_points = 64;
  double manifold_depth = 128.0;
  double union_tol = 5e-3;  // d_H(section, union of the manifolds)
  FanSpec fan;
};

struct GradientCheck
{
  ConnectionGraph graph;
  Report report;
};

// Forward limits by integration over the horizon, backward limits by the
// nearest grown unstable manifold. Rows "endpoint_match" and
// "lyapunov_monotone" per witness, "energy_order" per edge and
// "manifold_union", the symmetric d_H between the section and the union of
// the grown manifolds.
GradientCheck gradient_structure_check(const AttractorSection &section, const std::vector<Equilibrium> &equilibria,
                                       const GradientSpec &spec, const IntegratorConfig &config,
                                       const EvolutionContext &ctx);

// Rows "Y1_bound" (max Y1 norm, finite) and "Y1_dominates_Y0"
// (max Y1 >= lambda_1^{1/2} max Y0).
Report regularity_audit(const AttractorSection &section, const EvolutionContext &ctx);

// Y1 bounds over an eps grid: "Y1_spread" (max / min within 1.25) and, with
// sections at 2N, "Y1_truncation" per eps (relative change within 15%).
Report regularity_sweep(const std::vector<AttractorSection> &sections, const EvolutionContext &ctx,
                        const std::vector<AttractorSection> *fine_sections = nullptr,
                        const EvolutionContext *fine_ctx = nullptr);

}  // namespace sdwave

#endif  // SDWAVE_ATTRACTOR_HPP
