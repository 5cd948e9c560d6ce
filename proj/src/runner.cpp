// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "sdwave/attractor.hpp"
#include "sdwave/equilibria.hpp"
#include "sdwave/errors.hpp"
#include "sdwave/linearized_dynamics.hpp"
#include "sdwave/operators.hpp"

namespace sdwave
{

namespace fs = std::filesystem;

namespace
{

std::string num(double x)
{
  if (std::isnan(x))
    return "nan";
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_quote(const std::string &s)
{
  std::string out = "\"";
  for (char c : s)
  {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + '"';
}

//
// CSV text with a leading comment line carrying the schema version and the
// scenario hash.
//
class Csv
{
public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string> &cells) { rows_.push_back(cells); }

  std::string str(const std::string &hash) const
  {
    std::string out = "# sdwave schema " + std::to_string(kSchemaVersion) + " scenario " + hash + "\n";
    auto line = [&out](const std::vector<std::string> &cells) {
      for (std::size_t i = 0; i < cells.size(); ++i)
      {
        out += (i ? "," : "") + cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto &r : rows_)
    {
      line(r);
    }
    return out;
  }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Outcome
{
  std::vector<Report> reports;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  nlohmann::json extra = nlohmann::json::object();
};

struct Job
{
  const Scenario &scenario;
  const EvolutionContext &ctx;
  const RunOptions &options;
  fs::path out_dir;
  std::string hash;
};

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index;
// the exception of the lowest failing index is rethrown.
void parallel_for(int n, int jobs, const std::function<void(int)> &fn)
{
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1)
  {
    for (int i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
  {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++)
      {
        try
        {
          fn(i);
        }
        catch (...)
        {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  for (const auto &e : errors)
  {
    if (e)
      std::rethrow_exception(e);
  }
}

void tag(Report &rep, const std::string &key, const nlohmann::json &value)
{
  for (auto &r : rep.rows)
  {
    r.parameters[key] = value;
  }
  rep.details[key] = value;
}

void append(Report &into, const Report &from)
{
  into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
  into.warnings.insert(into.warnings.end(), from.warnings.begin(), from.warnings.end());
}

std::vector<double> descending(std::vector<double> v)
{
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<double> linspace(double a, double b, int n)
{
  std::vector<double> out;
  for (int i = 0; i < n; ++i)
  {
    out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  }
  return out;
}

IntegratorConfig attractor_integrator(const Scenario &sc)
{
  IntegratorConfig c = sc.integrator;
  c.dt = sc.attractor.dt;
  return c;
}

SampleSpec sample_spec(const Scenario &sc)
{
  SampleSpec s;
  s.radius = sc.attractor.radius;
  s.count = sc.attractor.samples;
  s.leading_modes = sc.attractor.leading_modes;
  s.seed = sc.rng_seed;
  return s;
}

PullbackConfig pullback_config(const Scenario &sc, int jobs)
{
  PullbackConfig p;
  p.T0 = sc.attractor.T0;
  p.max_doublings = sc.attractor.max_doublings;
  p.tol = sc.attractor.tol;
  p.refine_budget = sc.attractor.refine_budget;
  p.jobs = jobs;
  return p;
}

std::vector<Equilibrium> certified_equilibria(const Job &job)
{
  SearchSpec spec;
  spec.seed = job.scenario.rng_seed;
  std::vector<Equilibrium> list = enumerate_equilibria(job.ctx, spec);
  for (auto &e : list)
  {
    e = certify_hyperbolicity(e, job.ctx.family, job.ctx);
  }
  return list;
}

void mode_columns(const char *prefix, int n, std::vector<std::string> &header)
{
  for (int k = 0; k < n; ++k)
  {
    header.push_back(std::string(prefix) + "_" + std::to_string(k));
  }
}

std::string section_csv(const AttractorSection &s, const std::string &hash)
{
  std::ostringstream os;
  os << "# sdwave schema " << kSchemaVersion << " scenario " << hash << "\n";
  write_section_csv(os, s);
  return os.str();
}

std::string eps_label(double eps)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", eps);
  return buf;
}

// ---------------------------------------------------------------- simulate

Outcome simulate(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto grid = eps_grid(sc);
  const ModalState W0 = initial_state(sc, job.ctx.basis);
  std::vector<TrajectoryRecord> records(grid.size());
  parallel_for(static_cast<int>(grid.size()), job.options.jobs, [&](int i) {
    records[static_cast<std::size_t>(i)] =
        evolve(W0, sc.time.tau, sc.time.t_final, grid[static_cast<std::size_t>(i)], sc.integrator, job.ctx);
  });
  const int N = job.ctx.basis.size();
  std::vector<std::string> header{"eps", "t", "energy", "dissipation_rate", "norm_Y0", "norm_Y1"};
  mode_columns("u", N, header);
  Csv csv(header);
  Outcome out;
  for (const auto &rec : records)
  {
    for (std::size_t k = 0; k < rec.times.size(); ++k)
    {
      const ModalState &s = rec.states[k];
      std::vector<std::string> cells{num(rec.eps),
                                     num(rec.times[k]),
                                     num(rec.energies[k]),
                                     num(rec.dissipation_rates[k]),
                                     num(norm_Y0(s, job.ctx.basis)),
                                     num(norm_Y1(s, job.ctx.basis))};
      for (int m = 0; m < N; ++m)
      {
        cells.push_back(num(s.u()[m]));
      }
      csv.row(cells);
    }
    Report audit = run_dissipation_audit(rec, job.ctx);
    tag(audit, "eps", rec.eps);
    out.reports.push_back(std::move(audit));
  }
  out.files.emplace_back("timeseries.csv", csv.str(job.hash));
  return out;
}

// ------------------------------------------------------- verify-estimates

Report imaginary_axis_sweep(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto &fam = job.ctx.family;
  Report rep;
  rep.name = "imaginary_axis";
  const double M = imaginary_axis_constant(sc.eta, fam.a1_upper);
  std::vector<double> betas;
  for (int j = sc.verify.beta_min_exp * sc.verify.beta_per_octave; j <= sc.verify.beta_max_exp * sc.verify.beta_per_octave;
       ++j)
  {
    const double b = std::exp2(static_cast<double>(j) / sc.verify.beta_per_octave);
    betas.push_back(b);
    betas.push_back(-b);
  }
  const auto ts = linspace(sc.time.tau, sc.time.t_final, sc.verify.t_grid_points);
  for (double eps : eps_grid(sc))
  {
    double sup = 0.0, at_beta = 0.0, at_t = 0.0;
    for (double t : ts)
    {
      const OperatorAssembly op = assemble_operator(job.ctx.basis, sc.eta, eval_a(fam, eps, t));
      for (double b : betas)
      {
        const double v = std::abs(b) * resolvent_norm(op, {0.0, b});
        if (v > sup)
        {
          sup = v;
          at_beta = b;
          at_t = t;
        }
      }
    }
    rep.add("imaginary_axis", sup, M, sup <= M,
            {{"eps", eps}, {"a1", fam.a1_upper}, {"beta_at_sup", at_beta}, {"t_at_sup", at_t},
             {"beta_samples", betas.size()}, {"t_samples", ts.size()}});
  }
  rep.details["M"] = M;
  return rep;
}

Report inverse_identity(const Job &job)
{
  const Scenario &sc = job.scenario;
  Report rep;
  rep.name = "explicit_inverse";
  const int dim = 4 * job.ctx.basis.size();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  for (double eps : eps_grid(sc))
  {
    double worst = 0.0;
    for (double t : linspace(sc.time.tau, sc.time.t_final, sc.verify.t_grid_points))
    {
      const double a = eval_a(job.ctx.family, eps, t);
      const OperatorAssembly A = assemble_operator(job.ctx.basis, sc.eta, a);
      const OperatorAssembly Ai = assemble_inverse(job.ctx.basis, sc.eta, a);
      worst = std::max(worst, operator_norm_Y0(Eigen::MatrixXd(A.matrix * Ai.matrix - I), job.ctx.basis));
    }
    rep.add("inverse_identity", worst, 1e-10, worst < 1e-10, {{"eps", eps}});
  }
  return rep;
}

Outcome verify_estimates(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto &ctx = job.ctx;
  const auto eps_desc = descending(sc.eps_list);
  const ModalState W0 = initial_state(sc, ctx.basis);
  OperatorSetup setup{ctx.basis, sc.eta, no_potential(), false};

  std::vector<std::function<Report()>> tasks;
  tasks.emplace_back([&] { return imaginary_axis_sweep(job); });
  tasks.emplace_back([&] { return inverse_identity(job); });
  tasks.emplace_back([&] {
    Report rep;
    rep.name = "operator_difference_bound";
    for (double eps : eps_desc)
    {
      append(rep, verify_operator_difference_bound(ctx.family, eps, sc.verify.t, sc.time.tau, setup));
    }
    return rep;
  });
  tasks.emplace_back([&] { return verify_inverse_convergence(ctx.family, eps_desc, sc.verify.t, setup); });
  tasks.emplace_back([&] {
    return verify_semigroup_convergence(ctx.family, eps_desc,
                                        linspace(0.0, sc.verify.semigroup_s_max, sc.verify.semigroup_s_points),
                                        sc.verify.t, setup);
  });
  tasks.emplace_back(
      [&] { return process_comparison(ctx, PotentialData{}, eps_desc, sc.verify.process_windows, sc.verify.process_dt); });
  tasks.emplace_back([&] {
    // every step logged: the finite difference then resolves dE/dt
    IntegratorConfig fine = sc.integrator;
    fine.energy_log_stride = 1;
    const double eps = eps_desc.empty() ? 0.0 : eps_desc.front();
    Report rep = run_dissipation_audit(evolve(W0, sc.time.tau, sc.time.t_final, eps, fine, ctx), ctx);
    tag(rep, "eps", eps);
    return rep;
  });
  tasks.emplace_back([&] { return stability_comparison(W0, sc.time.tau, sc.time.t_final, eps_desc, sc.integrator, ctx); });
  tasks.emplace_back([&] {
    const double eps = eps_desc.empty() ? 0.0 : eps_desc.front();
    return translation_equivariance_check(W0, sc.time.tau, sc.verify.translation_shift, sc.verify.translation_window,
                                          eps, sc.integrator, ctx, sc.tolerances.translation_per_unit_time);
  });

  Outcome out;
  out.reports.resize(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), job.options.jobs,
               [&](int i) { out.reports[static_cast<std::size_t>(i)] = tasks[static_cast<std::size_t>(i)](); });
  return out;
}

// ---------------------------------------------------------------- equilibria

std::string equilibria_csv(const std::vector<Equilibrium> &list, const EvolutionContext &ctx, const std::string &hash)
{
  const int N = ctx.basis.size();
  std::vector<std::string> header{"index",           "energy",          "morse_index",    "residual_norm",
                                  "elliptic_hyperbolic", "dynamic_hyperbolic", "elliptic_margin", "dynamic_margin",
                                  "norm_Y0"};
  mode_columns("u", N, header);
  Csv csv(header);
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    const auto &e = list[i];
    std::vector<std::string> cells{std::to_string(i),
                                   num(e.energy_value),
                                   std::to_string(e.morse_index),
                                   num(e.residual_norm),
                                   e.elliptic_hyperbolic ? "1" : "0",
                                   e.dynamic_hyperbolic ? "1" : "0",
                                   num(e.elliptic_margin),
                                   num(e.dynamic_margin),
                                   num(norm_Y0(e.state(), ctx.basis))};
    for (int k = 0; k < N; ++k)
    {
      cells.push_back(num(e.u_star[k]));
    }
    csv.row(cells);
  }
  return csv.str(hash);
}

Outcome equilibria(const Job &job)
{
  const auto list = certified_equilibria(job);
  Outcome out;
  Report rep;
  rep.name = "equilibrium_census";
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    const auto &e = list[i];
    rep.add("residual", e.residual_norm, 1e-10, e.residual_norm < 1e-10,
            {{"index", i}, {"morse_index", e.morse_index}, {"energy", e.energy_value}});
  }
  rep.details["count"] = list.size();
  nlohmann::json morse = nlohmann::json::array();
  for (const auto &e : list)
  {
    morse.push_back(e.morse_index);
  }
  rep.details["morse_indices"] = morse;
  out.reports.push_back(std::move(rep));
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto &e : list)
  {
    eqs.push_back(to_json(e));
  }
  out.extra["equilibria"] = eqs;
  out.files.emplace_back("equilibria.csv", equilibria_csv(list, job.ctx, job.hash));
  return out;
}

// ---------------------------------------------------------------- linearize

Outcome linearize(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto list = certified_equilibria(job);
  const BBoundConstant c = fit_B_constant(list, job.ctx);
  const auto grid = eps_grid(sc);
  const auto eps_desc = descending(sc.eps_list);

  Report bounds;
  bounds.name = "linearization_bound";
  Csv csv({"equilibrium", "eps", "t", "B_norm", "B_bound"});
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    for (double eps : grid)
    {
      const Linearization lin = assemble_linearization(list[i], eps, sc.verify.t, job.ctx, c);
      const double bound = lin.B_bound.value_or(std::numeric_limits<double>::infinity());
      bounds.add("B_bound", lin.B_norm, bound, lin.B_ok, {{"equilibrium", i}, {"eps", eps}, {"t", sc.verify.t}});
      csv.row({std::to_string(i), num(eps), num(sc.verify.t), num(lin.B_norm), num(bound)});
    }
  }
  bounds.details["c"] = c.c;
  bounds.details["max_equilibrium_norm"] = c.max_equilibrium_norm;

  Outcome out;
  out.reports.push_back(std::move(bounds));
  std::vector<Report> procs(list.size());
  parallel_for(static_cast<int>(list.size()), job.options.jobs, [&](int i) {
    const auto &e = list[static_cast<std::size_t>(i)];
    Report r = process_comparison(job.ctx, equilibrium_potential_data(e, job.ctx), eps_desc, sc.linearize.windows,
                                  sc.linearize.dt);
    tag(r, "equilibrium", i);
    procs[static_cast<std::size_t>(i)] = std::move(r);
  });
  for (auto &r : procs)
  {
    out.reports.push_back(std::move(r));
  }
  out.files.emplace_back("linearization.csv", csv.str(job.hash));
  return out;
}

// ---------------------------------------------------------------- dichotomy

Outcome dichotomy(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto &period = job.ctx.family.period;
  if (!period)
  {
    throw InvalidArgument("dichotomy: the coefficient frequencies have no common period");
  }
  const auto list = certified_equilibria(job);
  const auto grid = eps_grid(sc);
  std::vector<int> picked;
  Outcome out;
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    if (list[i].dynamic_hyperbolic)
      picked.push_back(static_cast<int>(i));
  }
  std::vector<Report> scans(picked.size());
  parallel_for(static_cast<int>(picked.size()), job.options.jobs, [&](int k) {
    const auto &e = list[static_cast<std::size_t>(picked[static_cast<std::size_t>(k)])];
    Report r = dichotomy_persistence_scan(job.ctx, e, grid, *period, sc.dichotomy.dt, sc.tolerances.dichotomy_gap);
    // Floquet rank at eps = 0 against the Morse index
    if (!r.details["table"].empty() && r.details["table"][0]["eps"].get<double>() == 0.0)
    {
      const int rank = r.details["table"][0]["rank_Q"].get<int>();
      r.add("rank_equals_morse", rank, e.morse_index, rank == e.morse_index);
    }
    tag(r, "equilibrium", picked[static_cast<std::size_t>(k)]);
    scans[static_cast<std::size_t>(k)] = std::move(r);
  });
  Csv csv({"equilibrium", "eps", "rank_Q", "gap", "M", "omega", "worst_ratio", "projection_drift"});
  for (std::size_t k = 0; k < picked.size(); ++k)
  {
    for (const auto &row : scans[k].details["table"])
    {
      csv.row({std::to_string(picked[k]), num(row["eps"].get<double>()), std::to_string(row["rank_Q"].get<int>()),
               num(row["gap"].get<double>()), num(row["M"].get<double>()), num(row["omega"].get<double>()),
               num(row["worst_ratio"].get<double>()), num(row["projection_drift"].get<double>())});
    }
    out.reports.push_back(std::move(scans[k]));
  }
  for (std::size_t i = 0; i < list.size(); ++i)
  {
    if (!list[i].dynamic_hyperbolic)
    {
      Report skip;
      skip.name = "dichotomy_persistence";
      skip.warnings.push_back("equilibrium " + std::to_string(i) + " is not hyperbolic; skipped");
      tag(skip, "equilibrium", static_cast<int>(i));
      out.reports.push_back(std::move(skip));
    }
  }
  out.extra["period"] = *period;
  out.files.emplace_back("dichotomy.csv", csv.str(job.hash));
  return out;
}

// ---------------------------------------------------------------- attractor

Outcome attractor(const Job &job)
{
  const Scenario &sc = job.scenario;
  const IntegratorConfig cfg = attractor_integrator(sc);
  const AttractorSection sec =
      pullback_iterate(sc.attractor.t, 0.0, sample_spec(sc), pullback_config(sc, job.options.jobs), cfg, job.ctx);
  Report pull;
  pull.name = "pullback";
  pull.add("section_converged", sec.cauchy_gap, sc.attractor.tol, sec.converged,
           {{"eps", 0.0}, {"points", sec.points.size()}, {"depth", sec.pullback_depths.back()}});
  const auto list = certified_equilibria(job);
  GradientSpec gs;
  gs.horizon = sc.attractor.horizon;
  gs.manifold_depth = sc.attractor.manifold_depth;
  gs.union_tol = 5.0 * sc.attractor.tol;
  gs.fan.spacing = sc.attractor.tol;
  gs.fan.seed = sc.rng_seed;
  GradientCheck g = gradient_structure_check(sec, list, gs, cfg, job.ctx);

  Outcome out;
  out.reports.push_back(std::move(pull));
  out.reports.push_back(std::move(g.report));
  out.reports.push_back(regularity_audit(sec, job.ctx));
  out.extra["section"] = manifest_json(sec);
  out.extra["graph"] = to_json(g.graph);
  out.files.emplace_back("attractor_section.csv", section_csv(sec, job.hash));
  return out;
}

// ------------------------------------------------------------ semicontinuity

Outcome semicontinuity(const Job &job)
{
  const Scenario &sc = job.scenario;
  const auto eps_desc = descending(sc.eps_list);
  if (eps_desc.empty())
  {
    throw InvalidArgument("semicontinuity: eps_list is empty");
  }
  std::vector<AttractorSection> secs;
  Report rep = semicontinuity_sweep(sc.attractor.t, eps_desc, sample_spec(sc), pullback_config(sc, job.options.jobs),
                                    attractor_integrator(sc), job.ctx, &secs);
  Outcome out;
  Csv csv({"eps", "sup_a_distance", "upper", "lower"});
  for (const auto &row : rep.details["table"])
  {
    csv.row({num(row["eps"].get<double>()), num(row["sup_a_distance"].get<double>()),
             num(row["upper"].get<double>()), num(row["lower"].get<double>())});
  }
  out.files.emplace_back("semicontinuity.csv", csv.str(job.hash));
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto &s : secs)
  {
    manifests.push_back(manifest_json(s));
  }
  // secs[0] is eps = 0, then eps_desc in order
  out.files.emplace_back("section_eps_0.csv", section_csv(secs.front(), job.hash));
  for (std::size_t i = 0; i < eps_desc.size(); ++i)
  {
    out.files.emplace_back("section_eps_" + eps_label(eps_desc[i]) + ".csv", section_csv(secs[i + 1], job.hash));
  }
  out.extra["sections"] = manifests;
  out.reports.push_back(std::move(rep));
  out.reports.push_back(regularity_sweep(secs, job.ctx));
  return out;
}

// ---------------------------------------------------------------- report

Outcome summarize(const Job &job)
{
  Outcome out;
  std::vector<fs::path> inputs;
  if (fs::is_directory(job.out_dir))
  {
    for (const auto &entry : fs::directory_iterator(job.out_dir))
    {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && entry.path().extension() == ".json" && name != "manifest.json" &&
          name != "report.json")
      {
        inputs.push_back(entry.path());
      }
    }
  }
  std::sort(inputs.begin(), inputs.end());
  Csv csv({"file", "report", "estimate_id", "measured", "bound", "pass", "parameters"});
  nlohmann::json index = nlohmann::json::array();
  Report rep;
  rep.name = "summary";
  for (const auto &path : inputs)
  {
    std::ifstream in(path);
    nlohmann::json doc;
    try
    {
      doc = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception &err)
    {
      rep.warnings.push_back(path.filename().string() + ": unreadable (" + err.what() + ")");
      continue;
    }
    if (!doc.contains("reports"))
      continue;
    int rows = 0, failed = 0;
    for (const auto &r : doc["reports"])
    {
      for (const auto &row : r["rows"])
      {
        ++rows;
        const bool pass = row["pass"].get<bool>();
        failed += pass ? 0 : 1;
        auto cell = [](const nlohmann::json &v) { return v.is_number() ? num(v.get<double>()) : v.dump(); };
        csv.row({path.filename().string(), r["report"].get<std::string>(), row["estimate_id"].get<std::string>(),
                 cell(row["measured"]), cell(row["bound"]), pass ? "1" : "0", csv_quote(row["parameters"].dump())});
      }
    }
    index.push_back({{"file", path.filename().string()},
                     {"subcommand", doc.value("subcommand", "")},
                     {"scenario_hash", doc.value("scenario_hash", "")},
                     {"rows", rows},
                     {"failed", failed}});
    rep.add("artifact_pass", failed, 0.0, failed == 0, {{"file", path.filename().string()}, {"rows", rows}});
  }
  out.reports.push_back(std::move(rep));
  out.extra["artifacts"] = index;
  out.files.emplace_back("summary.csv", csv.str(job.hash));
  return out;
}

using Command = std::function<Outcome(const Job &)>;

const std::map<std::string, Command> &commands()
{
  static const std::map<std::string, Command> table{
      {"simulate", simulate},       {"verify-estimates", verify_estimates}, {"equilibria", equilibria},
      {"linearize", linearize},     {"dichotomy", dichotomy},               {"attractor", attractor},
      {"semicontinuity", semicontinuity}, {"report", summarize}};
  return table;
}

// ---------------------------------------------------------------- persistence

void write_atomic(const fs::path &path, const std::string &content)
{
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
    {
      throw NumericalFailure("cannot write '" + tmp.string() + "'");
    }
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os)
    {
      throw NumericalFailure("short write to '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

nlohmann::json read_manifest(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    return nlohmann::json::object();
  }
  try
  {
    nlohmann::json m = nlohmann::json::parse(in);
    if (m.contains("files") && m["files"].is_array())
      return m;
  }
  catch (const nlohmann::json::exception &)
  {
  }
  return nlohmann::json::object();
}

std::string output_stem(const std::string &subcommand)
{
  std::string s = subcommand;
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

int exit_for(const std::exception &err, std::string &kind)
{
  if (dynamic_cast<const ConfigError *>(&err) || dynamic_cast<const InvalidArgument *>(&err))
  {
    kind = "config";
    return kExitConfig;
  }
  if (dynamic_cast<const HypothesisViolation *>(&err) || dynamic_cast<const HyperbolicityViolation *>(&err))
  {
    kind = "hypothesis";
    return kExitHypothesis;
  }
  kind = "numerical";
  return kExitNumerical;
}

}  // namespace

const std::vector<std::string> &subcommands()
{
  static const std::vector<std::string> names{"simulate",  "verify-estimates", "equilibria",     "linearize",
                                              "dichotomy", "attractor",        "semicontinuity", "report"};
  return names;
}

bool is_verification(const std::string &subcommand)
{
  return subcommand != "simulate" && subcommand != "equilibria";
}

fs::path resolve_output_dir(const Scenario &scenario, const std::string &out_override)
{
  if (!out_override.empty())
  {
    return fs::path(out_override);
  }
  fs::path p(scenario.output_dir);
  const char *root = std::getenv(kOutputRootEnv);
  if (p.is_relative() && root && *root)
  {
    return fs::path(root) / p;
  }
  return p;
}

RunResult run(const Scenario &input, const RunOptions &options, std::ostream &log)
{
  RunResult result;
  try
  {
    const auto it = commands().find(options.subcommand);
    if (it == commands().end())
    {
      throw ConfigError("unknown subcommand '" + options.subcommand + "'");
    }
    if (options.jobs < 1)
    {
      throw ConfigError("--jobs must be at least 1");
    }
    Scenario sc = input;
    if (options.seed)
    {
      sc.rng_seed = *options.seed;
    }
    const std::string hash = scenario_hash(sc);
    result.out_dir = resolve_output_dir(sc, options.out_dir);

    std::vector<Report> hypotheses = validate_hypotheses(sc);
    const EvolutionContext ctx = make_context(sc);
    const Job job{sc, ctx, options, result.out_dir, hash};
    log << "sdwave " << options.subcommand << ": scenario " << sc.name << " (" << hash.substr(0, 12) << "), N = "
        << ctx.basis.size() << '\n';
    Outcome out = it->second(job);

    const bool audit = options.truncation_audit && options.subcommand != "report";
    std::optional<Outcome> fine;
    std::optional<EvolutionContext> fine_ctx;
    if (audit)
    {
      fine_ctx = make_context(sc, true);
      log << "sdwave " << options.subcommand << ": truncation audit at N = " << fine_ctx->basis.size() << '\n';
      fine = it->second(Job{sc, *fine_ctx, options, result.out_dir, hash});
      if (fine->reports.size() != out.reports.size())
      {
        throw NumericalFailure("truncation audit: report lists differ between N and 2N");
      }
      for (std::size_t i = 0; i < out.reports.size(); ++i)
      {
        try
        {
          attach_truncation(out.reports[i], fine->reports[i], sc.tolerances.truncation_rel);
        }
        catch (const InvalidArgument &err)
        {
          out.reports[i].warnings.push_back(std::string("truncation audit skipped: ") + err.what());
        }
      }
    }

    std::vector<Report> all = hypotheses;
    all.insert(all.end(), out.reports.begin(), out.reports.end());
    bool pass = true;
    for (const auto &r : all)
    {
      pass = pass && r.all_pass();
    }

    const std::string stem = output_stem(options.subcommand);
    nlohmann::json doc = {{"schema_version", kSchemaVersion},
                          {"subcommand", options.subcommand},
                          {"scenario_hash", hash},
                          {"scenario", to_json(sc)},
                          {"n_modes", ctx.basis.size()},
                          {"truncation_audit", audit},
                          {"pass", pass},
                          {"reports", nlohmann::json::array()}};
    for (const auto &r : all)
    {
      doc["reports"].push_back(r.to_json());
    }
    for (auto &[k, v] : out.extra.items())
    {
      doc[k] = v;
    }
    if (fine)
    {
      doc["refined"] = fine->extra;
    }

    Csv rows({"report", "estimate_id", "measured", "bound", "pass", "truncation_coarse", "truncation_fine",
              "parameters"});
    for (const auto &r : all)
    {
      for (const auto &row : r.rows)
      {
        const bool tp = row.truncation_pair.has_value();
        rows.row({r.name, row.estimate_id, num(row.measured), num(row.bound), row.pass ? "1" : "0",
                  tp ? num(row.truncation_pair->first) : "", tp ? num(row.truncation_pair->second) : "",
                  csv_quote(row.parameters.dump())});
      }
    }

    std::vector<std::pair<std::string, std::string>> files = out.files;
    if (fine)
    {
      for (const auto &[name, content] : fine->files)
      {
        files.emplace_back("refined/" + name, content);
      }
    }
    files.emplace_back(stem + ".json", doc.dump(2) + "\n");
    files.emplace_back(stem + "_rows.csv", rows.str(hash));

    const fs::path manifest_path = result.out_dir / "manifest.json";
    nlohmann::json manifest = read_manifest(manifest_path);
    std::map<std::string, nlohmann::json> entries;
    if (manifest.contains("files"))
    {
      for (const auto &e : manifest["files"])
      {
        entries[e["name"].get<std::string>()] = e;
      }
    }
    for (const auto &[name, content] : files)
    {
      write_atomic(result.out_dir / name, content);
      entries[name] = {{"name", name},
                       {"sha256", sha256_hex(content)},
                       {"bytes", content.size()},
                       {"subcommand", options.subcommand},
                       {"scenario_hash", hash}};
      result.files.push_back(name);
    }
    manifest = {{"schema_version", kSchemaVersion}, {"files", nlohmann::json::array()}};
    for (const auto &[name, e] : entries)
    {
      manifest["files"].push_back(e);
    }
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    result.files.push_back("manifest.json");

    int failed = 0;
    for (const auto &r : all)
    {
      for (const auto &row : r.rows)
      {
        if (!row.pass)
        {
          ++failed;
          log << "FAIL " << r.name << "/" << row.estimate_id << ": measured " << num(row.measured) << ", bound "
              << num(row.bound) << " " << row.parameters.dump() << '\n';
        }
      }
      for (const auto &w : r.warnings)
      {
        log << "warning " << r.name << ": " << w << '\n';
      }
    }
    if (failed > 0 && is_verification(options.subcommand))
    {
      result.exit_code = kExitAssertion;
      result.message = std::to_string(failed) + " assertion(s) failed";
    }
    else
    {
      result.message = "ok";
    }
    log << "sdwave " << options.subcommand << ": " << result.message << ", " << result.files.size()
        << " file(s) in " << result.out_dir.string() << '\n';
  }
  catch (const ConfigError &err)
  {
    result.exit_code = kExitConfig;
    result.message = err.what();
    log << "config error: " << err.what() << '\n';
  }
  catch (const std::exception &err)
  {
    std::string kind;
    result.exit_code = exit_for(err, kind);
    result.message = err.what();
    log << kind << " error: " << err.what() << '\n';
  }
  return result;
}

RunResult run(const RunOptions &options, std::ostream &log)
{
  try
  {
    if (options.scenario_path.empty())
    {
      throw ConfigError("no scenario given (--scenario PATH)");
    }
    return run(load_scenario(options.scenario_path), options, log);
  }
  catch (const ConfigError &err)
  {
    log << "config error: " << err.what() << '\n';
    RunResult r;
    r.exit_code = kExitConfig;
    r.message = err.what();
    return r;
  }
}

}  // namespace sdwave
