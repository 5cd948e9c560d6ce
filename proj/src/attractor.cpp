// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "sdwave/errors.hpp"
#include "sdwave/linearized_dynamics.hpp"
#include "sdwave/operators.hpp"

namespace sdwave
{

namespace
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::MatrixXd to_matrix(const std::vector<ModalState> &pts)
{
  if (pts.empty())
  {
    return MatrixXd();
  }
  MatrixXd X(pts.front().flat().size(), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j)
  {
    X.col(static_cast<Eigen::Index>(j)) = pts[j].flat();
  }
  return X;
}

std::vector<ModalState> to_states(const MatrixXd &X, double time)
{
  std::vector<ModalState> out;
  out.reserve(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j)
  {
    out.emplace_back(VectorXd(X.col(j)), time);
  }
  return out;
}

// Columns are independent, so chunks run on separate threads.
void advance_columns(MatrixXd &X, double tau, double t, double eps, const IntegratorConfig &config,
                     const EvolutionContext &ctx, int jobs)
{
  if (X.cols() == 0 || !(t > tau))
  {
    return;
  }
  jobs = std::clamp(jobs, 1, static_cast<int>(X.cols()));
  if (jobs == 1)
  {
    advance_batch(X, tau, t, eps, config, ctx);
    return;
  }
  const Eigen::Index n = X.cols();
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int k = 0; k < jobs; ++k)
  {
    const Eigen::Index begin = n * k / jobs, end = n * (k + 1) / jobs;
    pool.emplace_back([&, k, begin, end] {
      try
      {
        MatrixXd part = X.middleCols(begin, end - begin);
        advance_batch(part, tau, t, eps, config, ctx);
        X.middleCols(begin, end - begin) = part;
      }
      catch (...)
      {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto &th : pool)
  {
    th.join();
  }
  for (const auto &e : errors)
  {
    if (e)
    {
      std::rethrow_exception(e);
    }
  }
}

bool within(const VectorXd &y, const MatrixXd &set, Eigen::Index count, double h)
{
  const double h2 = h * h;
  for (Eigen::Index j = 0; j < count; ++j)
  {
    if ((set.col(j) - y).squaredNorm() <= h2)
    {
      return true;
    }
  }
  return false;
}

//
// Bisection of segments in the space of initial data at tau until the images
// at t are within h of each other. Every top-level segment is a lineage; once
// a lineage is finished its images become the coverage set, and sub-segments
// of later lineages whose two end images are already covered are dropped.
//
class SegmentRefiner
{
public:
  SegmentRefiner(const EvolutionContext &ctx, const IntegratorConfig &config, double tau, double t, double eps,
                 double h, int jobs)
      : ctx_(ctx), config_(config), tau_(tau), t_(t), eps_(eps), h_(h), jobs_(jobs), w_(weights_Y0(ctx.basis))
  {
  }

  // Adds initial data; their images are computed in one batch.
  void add_initial(const MatrixXd &X0)
  {
    MatrixXd Y = X0;
    advance_columns(Y, tau_, t_, eps_, config_, ctx_, jobs_);
    for (Eigen::Index j = 0; j < X0.cols(); ++j)
    {
      push(X0.col(j), Y.col(j));
    }
  }

  void refine(std::vector<std::pair<int, int>> segments, int budget)
  {
    std::erase_if(segments, [&](const auto &s) { return gap(s.first, s.second) <= h_; });
    std::stable_sort(segments.begin(), segments.end(),
                     [&](const auto &a, const auto &b) { return gap(a.first, a.second) > gap(b.first, b.second); });
    for (const auto &seg : segments)
    {
      std::vector<std::pair<int, int>> pending;
      if (needs_split(seg.first, seg.second))
      {
        pending.push_back(seg);
      }
      std::vector<int> lineage{seg.first, seg.second};
      while (!pending.empty())
      {
        if (added_ + static_cast<int>(pending.size()) > budget)
        {
          truncated_ = true;
          cover(lineage);
          return;
        }
        MatrixXd M(init_.rows(), static_cast<Eigen::Index>(pending.size()));
        for (std::size_t k = 0; k < pending.size(); ++k)
        {
          M.col(static_cast<Eigen::Index>(k)) = 0.5 * (init_.col(pending[k].first) + init_.col(pending[k].second));
        }
        MatrixXd Y = M;
        advance_columns(Y, tau_, t_, eps_, config_, ctx_, jobs_);
        std::vector<std::pair<int, int>> next;
        for (std::size_t k = 0; k < pending.size(); ++k)
        {
          const int m = push(M.col(static_cast<Eigen::Index>(k)), Y.col(static_cast<Eigen::Index>(k)));
          ++added_;
          lineage.push_back(m);
          for (const auto &child : {std::pair{pending[k].first, m}, std::pair{m, pending[k].second}})
          {
            if (needs_split(child.first, child.second))
            {
              next.push_back(child);
            }
          }
        }
        pending = std::move(next);
      }
      cover(lineage);
    }
  }

  MatrixXd images() const { return image_.leftCols(size_); }
  MatrixXd weighted_images() const { return w_.asDiagonal() * image_.leftCols(size_); }
  bool truncated() const { return truncated_; }

private:
  int push(const VectorXd &x, const VectorXd &y)
  {
    if (size_ == init_.cols())
    {
      const Eigen::Index cap = std::max<Eigen::Index>(64, 2 * size_);
      init_.conservativeResize(x.size(), cap);
      image_.conservativeResize(y.size(), cap);
      wimage_.conservativeResize(y.size(), cap);
      covered_.conservativeResize(y.size(), cap);
    }
    init_.col(size_) = x;
    image_.col(size_) = y;
    wimage_.col(size_) = w_.cwiseProduct(y);
    is_covered_.push_back(false);
    return static_cast<int>(size_++);
  }

  double gap(int a, int b) const { return (wimage_.col(a) - wimage_.col(b)).norm(); }

  bool needs_split(int a, int b) const
  {
    if (gap(a, b) <= h_)
    {
      return false;
    }
    return !(within(wimage_.col(a), covered_, covered_count_, h_) &&
             within(wimage_.col(b), covered_, covered_count_, h_));
  }

  void cover(const std::vector<int> &lineage)
  {
    for (int i : lineage)
    {
      if (!is_covered_[static_cast<std::size_t>(i)])
      {
        is_covered_[static_cast<std::size_t>(i)] = true;
        covered_.col(covered_count_++) = wimage_.col(i);
      }
    }
  }

  const EvolutionContext &ctx_;
  const IntegratorConfig &config_;
  double tau_, t_, eps_, h_;
  int jobs_;
  VectorXd w_;
  MatrixXd init_, image_, wimage_, covered_;
  std::vector<bool> is_covered_;
  Eigen::Index size_ = 0, covered_count_ = 0;
  int added_ = 0;
  bool truncated_ = false;
};

double semidistance_columns(const MatrixXd &A, const MatrixXd &B)
{
  if (A.cols() == 0 || B.cols() == 0)
  {
    throw InvalidArgument("hausdorff: empty point cloud");
  }
  // exact sup-inf; the inner scan stops once it cannot raise the sup
  double sup2 = 0.0;
  for (Eigen::Index i = 0; i < A.cols(); ++i)
  {
    double inf2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < B.cols(); ++j)
    {
      const double d2 = (A.col(i) - B.col(j)).squaredNorm();
      if (d2 < inf2)
      {
        inf2 = d2;
        if (inf2 <= sup2)
        {
          break;
        }
      }
    }
    sup2 = std::max(sup2, inf2);
  }
  return std::sqrt(sup2);
}

double symmetric_columns(const MatrixXd &A, const MatrixXd &B)
{
  return std::max(semidistance_columns(A, B), semidistance_columns(B, A));
}

MatrixXd weighted_cloud(const std::vector<ModalState> &pts, const EvolutionContext &ctx)
{
  return weights_Y0(ctx.basis).asDiagonal() * to_matrix(pts);
}

CoefficientFamily frozen_family(double value)
{
  CoefficientFamily f;
  f.name = "frozen";
  f.base = [value](double) { return value; };
  f.perturbation = [](double) { return 0.0; };
  f.perturbation_sup = 0.0;
  f.a0_lower = value;
  f.a1_upper = value;
  f.period = 1.0;
  return f;
}

// Real orthonormal basis of the range of Q (Euclidean), as columns.
MatrixXd range_basis(const MatrixXd &Q, int rank)
{
  Eigen::JacobiSVD<MatrixXd> svd(Q, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(rank);
}

}  // namespace

Eigen::MatrixXd AttractorSection::matrix() const { return to_matrix(points); }

nlohmann::json manifest_json(const AttractorSection &s)
{
  return {{"t", s.time},
          {"eps", s.eps},
          {"depths", s.pullback_depths},
          {"cauchy_history", s.cauchy_history},
          {"cauchy_gap", s.cauchy_gap},
          {"radius", s.absorbing_radius},
          {"converged", s.converged},
          {"refinement_truncated", s.refinement_truncated},
          {"sample_count", s.sample_count},
          {"point_count", s.points.size()}};
}

void write_section_csv(std::ostream &os, const AttractorSection &s)
{
  static const char *names[] = {"u", "p", "v", "q"};
  const int N = s.points.empty() ? 0 : s.points.front().n_modes();
  os << "index";
  for (int k = 0; k < N; ++k)
  {
    for (const char *c : names)
    {
      os << ',' << c << '_' << k;
    }
  }
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < s.points.size(); ++i)
  {
    os << i;
    for (Eigen::Index j = 0; j < s.points[i].flat().size(); ++j)
    {
      os << ',' << s.points[i].flat()[j];
    }
    os << '\n';
  }
}

double fitted_absorbing_radius(double eps, const IntegratorConfig &config, const EvolutionContext &ctx,
                               std::uint64_t seed)
{
  // the fit bounds |W|^2_Y0; the ball radius is its square root
  const Report rep = absorbing_radius_fit({1.0, 3.0, 5.0}, 8, 20.0, 40.0, eps, config, ctx, seed);
  return std::sqrt(rep.details["R"].get<double>());
}

AttractorSection pullback_iterate(double t, double eps, const SampleSpec &samples, const PullbackConfig &pullback,
                                  const IntegratorConfig &config, const EvolutionContext &ctx)
{
  validate(config);
  if (samples.count < 1 || pullback.T0 <= 0.0 || pullback.max_doublings < 0 || pullback.tol <= 0.0)
  {
    throw InvalidArgument("pullback_iterate: bad sample or pullback settings");
  }
  AttractorSection sec;
  sec.time = t;
  sec.eps = eps;
  sec.absorbing_radius =
      samples.radius > 0.0 ? samples.radius : fitted_absorbing_radius(eps, config, ctx, samples.seed);
  const int modes = std::min(samples.leading_modes, ctx.basis.size());
  const MatrixXd X0 = to_matrix(ball_samples(ctx.basis, sec.absorbing_radius, samples.count, std::max(1, modes),
                                             samples.seed, samples.symmetric));
  sec.sample_count = static_cast<int>(X0.cols());
  std::vector<std::pair<int, int>> segments;
  for (int i = 0; i + 1 < sec.sample_count; ++i)
  {
    segments.emplace_back(i, i + 1);
  }
  const double h = pullback.spacing > 0.0 ? pullback.spacing : pullback.tol;

  MatrixXd previous;
  sec.cauchy_gap = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= pullback.max_doublings; ++j)
  {
    const double depth = pullback.T0 * std::ldexp(1.0, j);
    SegmentRefiner refiner(ctx, config, t - depth, t, eps, h, pullback.jobs);
    refiner.add_initial(X0);
    refiner.refine(segments, pullback.refine_budget);
    sec.pullback_depths.push_back(depth);
    MatrixXd cloud = refiner.weighted_images();
    if (j > 0)
    {
      sec.cauchy_gap = symmetric_columns(cloud, previous);
      sec.cauchy_history.push_back(sec.cauchy_gap);
    }
    sec.points = to_states(refiner.images(), t);
    sec.refinement_truncated = refiner.truncated();
    if (j > 0 && sec.cauchy_gap < pullback.tol)
    {
      sec.converged = true;
      break;
    }
    previous = std::move(cloud);
  }
  return sec;
}

ManifoldCloud grow_unstable_manifold(const Equilibrium &e, double eps, double t, double depth, const FanSpec &fan,
                                     const IntegratorConfig &config, const EvolutionContext &ctx)
{
  validate(config);
  if (depth < 0.0 || fan.spacing <= 0.0)
  {
    throw InvalidArgument("grow_unstable_manifold: depth must be >= 0 and spacing > 0");
  }
  const double tau = t - depth;
  const PotentialData pot = equilibrium_potential_data(e, ctx);
  DichotomyData dich;
  try
  {
    if (ctx.family.period)
    {
      LinearProcess proc(ctx, pot, eps, config.dt);
      dich = floquet_analysis(proc, *ctx.family.period, tau);
    }
    else
    {
      EvolutionContext frozen = ctx;
      frozen.family = frozen_family(coefficient_time_mean(ctx.family, eps));
      LinearProcess proc(frozen, pot, 0.0, config.dt);
      dich = floquet_analysis(proc, 1.0, tau);
    }
  }
  catch (const DichotomyFailure &err)
  {
    throw InvalidArgument(std::string("grow_unstable_manifold: equilibrium is not hyperbolic: ") + err.what());
  }

  ManifoldCloud out;
  out.rank = dich.rank_Q;
  const ModalState base = e.state(tau);
  out.delta = fan.delta > 0.0 ? fan.delta : 1e-4 * (1.0 + norm_Y0(base, ctx.basis));

  const VectorXd w = weights_Y0(ctx.basis);
  std::vector<VectorXd> rays;
  if (out.rank > 0)
  {
    const MatrixXd U = range_basis(dich.projection_Q, out.rank);
    std::vector<VectorXd> coeffs;
    if (out.rank == 1)
    {
      coeffs = {VectorXd::Ones(1), -VectorXd::Ones(1)};
    }
    else
    {
      std::mt19937_64 rng(fan.seed);
      std::normal_distribution<double> g;
      for (int k = 0; k < fan.directions; ++k)
      {
        VectorXd c(out.rank);
        for (int i = 0; i < out.rank; ++i)
        {
          c[i] = g(rng);
        }
        coeffs.push_back(c);
      }
    }
    for (const auto &c : coeffs)
    {
      VectorXd d = U * c;
      rays.push_back(d / w.cwiseProduct(d).norm());
    }
  }

  // e* first, then the far end of each ray, then the refinement
  MatrixXd X0(base.flat().size(), static_cast<Eigen::Index>(1 + rays.size()));
  X0.col(0) = base.flat();
  for (std::size_t r = 0; r < rays.size(); ++r)
  {
    X0.col(static_cast<Eigen::Index>(r + 1)) = base.flat() + out.delta * rays[r];
  }
  // a couples only p and q, which vanish at e*, so e* is stationary for every
  // eps and its exact image is itself
  MatrixXd Y = e.state(t).flat();
  std::vector<int> branch{-1};
  for (std::size_t r = 0; r < rays.size(); ++r)
  {
    SegmentRefiner ray(ctx, config, tau, t, eps, fan.spacing, 1);
    MatrixXd ends(X0.rows(), 2);
    ends.col(0) = X0.col(0);
    ends.col(1) = X0.col(static_cast<Eigen::Index>(r + 1));
    ray.add_initial(ends);
    ray.refine({{0, 1}}, fan.budget);
    out.truncated = out.truncated || ray.truncated();
    const MatrixXd img = ray.images();
    // column 0 repeats the image of e*
    Y.conservativeResize(Y.rows(), Y.cols() + img.cols() - 1);
    Y.rightCols(img.cols() - 1) = img.rightCols(img.cols() - 1);
    branch.insert(branch.end(), static_cast<std::size_t>(img.cols() - 1), static_cast<int>(r));
  }
  out.points = to_states(Y, t);
  out.branch = std::move(branch);
  return out;
}

double hausdorff_semidistance_weighted(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B)
{
  return semidistance_columns(A, B);
}

double hausdorff_semidistance(const std::vector<ModalState> &A, const std::vector<ModalState> &B,
                              const EvolutionContext &ctx)
{
  if (A.empty() || B.empty())
  {
    throw InvalidArgument("hausdorff_semidistance: empty point cloud");
  }
  return semidistance_columns(weighted_cloud(A, ctx), weighted_cloud(B, ctx));
}

double hausdorff_distance(const std::vector<ModalState> &A, const std::vector<ModalState> &B,
                          const EvolutionContext &ctx)
{
  if (A.empty() || B.empty())
  {
    throw InvalidArgument("hausdorff_distance: empty point cloud");
  }
  return symmetric_columns(weighted_cloud(A, ctx), weighted_cloud(B, ctx));
}

Report semicontinuity_sweep(double t, const std::vector<double> &eps_list, const SampleSpec &samples,
                            const PullbackConfig &pullback, const IntegratorConfig &config, const EvolutionContext &ctx,
                            std::vector<AttractorSection> *sections)
{
  if (eps_list.empty())
  {
    throw InvalidArgument("semicontinuity_sweep: empty eps list");
  }
  Report rep;
  rep.name = "semicontinuity";
  // one radius for every eps, so the samples are identical
  SampleSpec spec = samples;
  if (spec.radius <= 0.0)
  {
    double r = 0.0;
    for (double eps : eps_list)
    {
      r = std::max(r, fitted_absorbing_radius(eps, config, ctx, samples.seed));
    }
    spec.radius = std::max(r, fitted_absorbing_radius(0.0, config, ctx, samples.seed));
  }
  std::vector<AttractorSection> secs;
  secs.push_back(pullback_iterate(t, 0.0, spec, pullback, config, ctx));
  for (double eps : eps_list)
  {
    secs.push_back(eps == 0.0 ? secs.front() : pullback_iterate(t, eps, spec, pullback, config, ctx));
  }

  bool partial = false;
  for (const auto &s : secs)
  {
    rep.add("section_converged", s.cauchy_gap, pullback.tol, s.converged,
            {{"eps", s.eps}, {"points", s.points.size()}, {"depth", s.pullback_depths.back()}});
    partial = partial || !s.converged;
  }
  if (partial)
  {
    rep.warnings.push_back("partial: at least one section did not converge");
  }
  rep.details["partial"] = partial;

  const MatrixXd A0 = weighted_cloud(secs.front().points, ctx);
  std::vector<double> upper, lower;
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < eps_list.size(); ++i)
  {
    const double eps = eps_list[i];
    const MatrixXd Ae = weighted_cloud(secs[i + 1].points, ctx);
    upper.push_back(semidistance_columns(Ae, A0));
    lower.push_back(semidistance_columns(A0, Ae));
    const double sup = ctx.family.sup_distance(eps);
    const bool zero_ok = eps != 0.0 || (upper.back() == 0.0 && lower.back() == 0.0);
    rep.add("upper_distance", upper.back(), sup, std::isfinite(upper.back()) && zero_ok, {{"eps", eps}});
    rep.add("lower_distance", lower.back(), sup, std::isfinite(lower.back()) && zero_ok,
            {{"eps", eps}, {"kind", "evidence"}});
    table.push_back({{"eps", eps}, {"sup_a_distance", sup}, {"upper", upper.back()}, {"lower", lower.back()}});
  }
  rep.details["table"] = table;
  for (auto [i, j] : halving_pairs(eps_list))
  {
    const nlohmann::json params = {{"eps", eps_list[i]}, {"eps_half", eps_list[j]}};
    rep.add("upper_decay", upper[j], 1.2 * upper[i], upper[j] <= 1.2 * upper[i], params);
    rep.add("lower_decay", lower[j], 1.2 * lower[i], lower[j] <= 1.2 * lower[i], params);
  }
  if (sections)
  {
    *sections = std::move(secs);
  }
  return rep;
}

bool ConnectionGraph::has_edge(int source, int target) const
{
  return std::any_of(edges.begin(), edges.end(),
                     [&](const ConnectionEdge &e) { return e.source == source && e.target == target; });
}

nlohmann::json to_json(const ConnectionGraph &g)
{
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto &n : g.nodes)
  {
    nodes.push_back(to_json(n));
  }
  for (const auto &e : g.edges)
  {
    edges.push_back({{"source", e.source},
                     {"target", e.target},
                     {"witness_count", e.witness_count},
                     {"witness_point", e.witness_point},
                     {"max_energy_rise", e.max_energy_rise},
                     {"arrival_time", e.arrival_time}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

GradientCheck gradient_structure_check(const AttractorSection &section, const std::vector<Equilibrium> &equilibria,
                                       const GradientSpec &spec, const IntegratorConfig &config,
                                       const EvolutionContext &ctx)
{
  if (section.points.empty() || equilibria.empty())
  {
    throw InvalidArgument("gradient_structure_check: empty section or equilibrium list");
  }
  if (!(spec.horizon > 0.0) || !(spec.log_interval > 0.0))
  {
    throw InvalidArgument("gradient_structure_check: horizon and log interval must be positive");
  }
  GradientCheck out;
  out.graph.nodes = equilibria;
  Report &rep = out.report;
  rep.name = "gradient_structure";
  if (!section.converged)
  {
    rep.warnings.push_back("section is not converged");
  }

  const VectorXd w = weights_Y0(ctx.basis);
  const int ne = static_cast<int>(equilibria.size());
  std::vector<VectorXd> eq_w;
  for (const auto &e : equilibria)
  {
    eq_w.push_back(w.cwiseProduct(e.state(section.time).flat()));
  }
  auto nearest_equilibrium = [&](const VectorXd &yw) {
    std::pair<int, double> best{-1, std::numeric_limits<double>::infinity()};
    for (int i = 0; i < ne; ++i)
    {
      const double d = (yw - eq_w[static_cast<std::size_t>(i)]).norm();
      if (d < best.second)
      {
        best = {i, d};
      }
    }
    return best;
  };

  std::vector<MatrixXd> manifolds;
  for (const auto &e : equilibria)
  {
    const auto cloud =
        grow_unstable_manifold(e, section.eps, section.time, spec.manifold_depth, spec.fan, config, ctx);
    manifolds.push_back(weighted_cloud(cloud.points, ctx));
  }

  const MatrixXd S = weights_Y0(ctx.basis).asDiagonal() * section.matrix();
  Eigen::Index union_cols = 0;
  for (const auto &m : manifolds)
  {
    union_cols += m.cols();
  }
  MatrixXd U(S.rows(), union_cols);
  for (Eigen::Index c = 0; const auto &m : manifolds)
  {
    U.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  const double sec_to_union = semidistance_columns(S, U);
  const double union_to_sec = semidistance_columns(U, S);
  const double d_union = std::max(sec_to_union, union_to_sec);
  rep.details["manifold_union_points"] = union_cols;
  std::vector<int> candidates;
  int resident = 0;
  for (Eigen::Index j = 0; j < S.cols(); ++j)
  {
    if (nearest_equilibrium(S.col(j)).second > spec.match_tol)
    {
      candidates.push_back(static_cast<int>(j));
    }
    else
    {
      ++resident;
    }
  }
  std::vector<int> chosen;
  const int nc = static_cast<int>(candidates.size());
  const int take = std::min(nc, spec.max_points);
  for (int k = 0; k < take; ++k)
  {
    chosen.push_back(candidates[static_cast<std::size_t>(static_cast<long>(k) * nc / take)]);
  }
  rep.details["resident_points"] = resident;
  rep.details["witness_candidates"] = nc;

  MatrixXd X(S.rows(), static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t k = 0; k < chosen.size(); ++k)
  {
    X.col(static_cast<Eigen::Index>(k)) = section.points[static_cast<std::size_t>(chosen[k])].flat();
  }
  const auto n_log = static_cast<int>(std::ceil(spec.horizon / spec.log_interval));
  const double h_log = spec.horizon / n_log;
  std::vector<double> prev_energy(chosen.size()), max_rise(chosen.size(), 0.0);
  std::vector<double> arrival(chosen.size(), -1.0);
  std::vector<int> arrival_target(chosen.size(), -1);
  auto record = [&](int step) {
    for (std::size_t k = 0; k < chosen.size(); ++k)
    {
      const ModalState st(VectorXd(X.col(static_cast<Eigen::Index>(k))), 0.0);
      const double E = energy(st, ctx);
      if (step > 0)
      {
        max_rise[k] = std::max(max_rise[k], E - prev_energy[k]);
      }
      prev_energy[k] = E;
      const auto [idx, d] = nearest_equilibrium(w.cwiseProduct(st.flat()));
      if (d <= spec.match_tol && (arrival[k] < 0.0 || arrival_target[k] != idx))
      {
        arrival[k] = step * h_log;
        arrival_target[k] = idx;
      }
      else if (d > spec.match_tol)
      {
        arrival[k] = -1.0;
      }
    }
  };
  record(0);
  for (int s = 0; s < n_log; ++s)
  {
    advance_columns(X, section.time + s * h_log, section.time + (s + 1) * h_log, section.eps, config, ctx, 1);
    record(s + 1);
  }

  for (std::size_t k = 0; k < chosen.size(); ++k)
  {
    const int pt = chosen[k];
    const auto [target, d_end] = nearest_equilibrium(w.cwiseProduct(VectorXd(X.col(static_cast<Eigen::Index>(k)))));
    const bool matched = d_end <= spec.match_tol;
    rep.add("endpoint_match", d_end, spec.match_tol, matched, {{"point", pt}, {"target", target}});
    const double slack = spec.energy_slack * std::max(1.0, std::abs(prev_energy[k]));
    rep.add("lyapunov_monotone", max_rise[k], slack, max_rise[k] <= slack, {{"point", pt}});
    if (!matched)
    {
      continue;
    }
    int source = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ne; ++i)
    {
      const double d = semidistance_columns(S.col(pt), manifolds[static_cast<std::size_t>(i)]);
      // prefer the higher energy on ties: the point then lies on its manifold
      if (d < best - 1e-12 ||
          (std::abs(d - best) <= 1e-12 && source >= 0 &&
           equilibria[static_cast<std::size_t>(i)].energy_value > equilibria[static_cast<std::size_t>(source)].energy_value))
      {
        best = d;
        source = i;
      }
    }
    if (source == target)
    {
      rep.add("distinct_limits", best, spec.match_tol, false, {{"point", pt}, {"equilibrium", source}});
      continue;
    }
    auto it = std::find_if(out.graph.edges.begin(), out.graph.edges.end(),
                           [&](const ConnectionEdge &e) { return e.source == source && e.target == target; });
    if (it == out.graph.edges.end())
    {
      ConnectionEdge e;
      e.source = source;
      e.target = target;
      e.witness_point = pt;
      e.arrival_time = arrival[k];
      out.graph.edges.push_back(e);
      it = std::prev(out.graph.edges.end());
    }
    ++it->witness_count;
    it->max_energy_rise = std::max(it->max_energy_rise, max_rise[k]);
  }
  for (const auto &e : out.graph.edges)
  {
    const double Es = equilibria[static_cast<std::size_t>(e.source)].energy_value;
    const double Et = equilibria[static_cast<std::size_t>(e.target)].energy_value;
    rep.add("energy_order", Es - Et, 0.0, Es > Et, {{"source", e.source}, {"target", e.target}});
  }
  rep.add("manifold_union", d_union, spec.union_tol, d_union < spec.union_tol,
          {{"section_to_union", sec_to_union}, {"union_to_section", union_to_sec}});
  rep.details["graph"] = to_json(out.graph)["edges"];
  return out;
}

Report regularity_audit(const AttractorSection &section, const EvolutionContext &ctx)
{
  Report rep;
  rep.name = "regularity";
  double y1 = 0.0, y0 = 0.0;
  for (const auto &p : section.points)
  {
    y1 = std::max(y1, norm_Y1(p, ctx.basis));
    y0 = std::max(y0, norm_Y0(p, ctx.basis));
  }
  rep.add("Y1_bound", y1, std::numeric_limits<double>::infinity(), std::isfinite(y1),
          {{"eps", section.eps}, {"t", section.time}});
  const double floor = std::sqrt(ctx.basis.lambda(0)) * y0;
  rep.add("Y1_dominates_Y0", y1, floor, y1 >= floor * (1.0 - 1e-12), {{"Y0_bound", y0}});
  rep.details["Y1_bound"] = y1;
  rep.details["Y0_bound"] = y0;
  return rep;
}

Report regularity_sweep(const std::vector<AttractorSection> &sections, const EvolutionContext &ctx,
                        const std::vector<AttractorSection> *fine_sections, const EvolutionContext *fine_ctx)
{
  if (sections.empty())
  {
    throw InvalidArgument("regularity_sweep: no sections");
  }
  Report rep;
  rep.name = "regularity_sweep";
  std::vector<double> bounds;
  for (const auto &s : sections)
  {
    bounds.push_back(regularity_audit(s, ctx).details["Y1_bound"].get<double>());
  }
  const double top = *std::max_element(bounds.begin(), bounds.end());
  const double low = *std::min_element(bounds.begin(), bounds.end());
  const double spread = low > 0.0 ? top / low : (top == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  rep.add("Y1_spread", spread, 1.25, spread <= 1.25, {{"max", top}, {"min", low}});
  if (fine_sections && fine_ctx)
  {
    if (fine_sections->size() != sections.size())
    {
      throw InvalidArgument("regularity_sweep: fine sections do not match");
    }
    for (std::size_t i = 0; i < sections.size(); ++i)
    {
      const double fine = regularity_audit((*fine_sections)[i], *fine_ctx).details["Y1_bound"].get<double>();
      const double rel = fine > 0.0 ? std::abs(fine - bounds[i]) / fine : std::abs(bounds[i]);
      auto &row = rep.add("Y1_truncation", rel, 0.15, rel <= 0.15, {{"eps", sections[i].eps}});
      row.truncation_pair = std::pair{bounds[i], fine};
    }
  }
  return rep;
}

}  // namespace sdwave
