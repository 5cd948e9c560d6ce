// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "sdwave/errors.hpp"
#include "sdwave/operators.hpp"

namespace sdwave
{

namespace
{

int line_of(const YAML::Node &node)
{
  const YAML::Mark m = node.Mark();
  return m.line >= 0 ? m.line + 1 : -1;
}

[[noreturn]] void fail(const YAML::Node &node, const std::string &field, const std::string &what)
{
  const int line = line_of(node);
  std::ostringstream os;
  os << "scenario";
  if (line > 0)
  {
    os << ":" << line;
  }
  os << ": field '" << field << "': " << what;
  throw ConfigError(os.str(), line);
}

//
// Typed access to one mapping with strict key checking. Every key read is
// remembered; finish() rejects the rest.
//
class Section
{
public:
  Section(const YAML::Node &node, std::string path) : node_(node), path_(std::move(path))
  {
    if (!node_.IsMap())
    {
      fail(node_, path_.empty() ? "<root>" : path_, "expected a mapping");
    }
  }

  bool has(const std::string &key)
  {
    seen_.insert(key);
    return static_cast<bool>(std::as_const(node_)[key]);
  }

  YAML::Node get(const std::string &key)
  {
    seen_.insert(key);
    return std::as_const(node_)[key];
  }

  std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const std::string &key, double &out)
  {
    if (!has(key))
      return;
    out = scalar_number(get(key), field(key));
  }

  void positive(const std::string &key, double &out)
  {
    number(key, out);
    if (has(key) && !(out > 0.0))
    {
      fail(get(key), field(key), "must be positive");
    }
  }

  void integer(const std::string &key, int &out, int min_value)
  {
    if (!has(key))
      return;
    const YAML::Node n = get(key);
    const double x = scalar_number(n, field(key));
    if (x != std::floor(x) || x < min_value || x > 1e9)
    {
      fail(n, field(key), "expected an integer >= " + std::to_string(min_value));
    }
    out = static_cast<int>(x);
  }

  void text(const std::string &key, std::string &out)
  {
    if (!has(key))
      return;
    const YAML::Node n = get(key);
    if (!n.IsScalar())
    {
      fail(n, field(key), "expected a string");
    }
    out = n.Scalar();
  }

  std::vector<double> numbers(const std::string &key)
  {
    const YAML::Node n = get(key);
    if (!n.IsSequence())
    {
      fail(n, field(key), "expected a list of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i)
    {
      out.push_back(scalar_number(n[i], field(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<std::pair<double, double>> windows(const std::string &key)
  {
    const YAML::Node n = get(key);
    if (!n.IsSequence() || n.size() == 0)
    {
      fail(n, field(key), "expected a non-empty list of [tau, t] pairs");
    }
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < n.size(); ++i)
    {
      const std::string f = field(key) + "[" + std::to_string(i) + "]";
      if (!n[i].IsSequence() || n[i].size() != 2)
      {
        fail(n[i], f, "expected [tau, t]");
      }
      const double tau = scalar_number(n[i][0], f), t = scalar_number(n[i][1], f);
      if (!(t > tau))
      {
        fail(n[i], f, "need t > tau");
      }
      out.emplace_back(tau, t);
    }
    return out;
  }

  Section child(const std::string &key) { return Section(get(key), field(key)); }

  void finish() const
  {
    for (auto it = node_.begin(); it != node_.end(); ++it)
    {
      const std::string key = it->first.Scalar();
      if (!seen_.count(key))
      {
        fail(it->first, field(key), "unknown key");
      }
    }
  }

  static double scalar_number(const YAML::Node &n, const std::string &field)
  {
    if (!n.IsScalar())
    {
      fail(n, field, "expected a number");
    }
    const std::string &s = n.Scalar();
    if (s == "pi")
      return std::numbers::pi;
    if (s == "2pi")
      return 2.0 * std::numbers::pi;
    double x = 0.0;
    try
    {
      x = n.as<double>();
    }
    catch (const YAML::Exception &)
    {
      fail(n, field, "expected a number, got '" + s + "'");
    }
    if (!std::isfinite(x))
    {
      fail(n, field, "must be finite");
    }
    return x;
  }

private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_basis(Section s, BasisConfig &b)
{
  std::string kind = b.kind == DomainKind::Interval ? "interval" : "box";
  s.text("kind", kind);
  if (kind == "interval")
    b.kind = DomainKind::Interval;
  else if (kind == "box")
    b.kind = DomainKind::Box;
  else
    fail(s.get("kind"), s.field("kind"), "expected 'interval' or 'box'");
  s.integer("n_modes", b.n_modes, 1);
  if (s.has("modes_per_axis"))
  {
    const auto m = s.numbers("modes_per_axis");
    if (m.size() != 3 || std::any_of(m.begin(), m.end(), [](double x) { return x < 1 || x != std::floor(x); }))
    {
      fail(s.get("modes_per_axis"), s.field("modes_per_axis"), "expected three positive integers");
    }
    b.modes_per_axis = {static_cast<int>(m[0]), static_cast<int>(m[1]), static_cast<int>(m[2])};
  }
  if (b.kind == DomainKind::Box && !s.has("lengths"))
  {
    b.lengths = {std::numbers::pi, std::numbers::pi, std::numbers::pi};
  }
  if (s.has("lengths"))
  {
    b.lengths = s.numbers("lengths");
    const std::size_t want = b.kind == DomainKind::Interval ? 1 : 3;
    if (b.lengths.size() != want ||
        std::any_of(b.lengths.begin(), b.lengths.end(), [](double x) { return !(x > 0.0); }))
    {
      fail(s.get("lengths"), s.field("lengths"), "expected " + std::to_string(want) + " positive length(s)");
    }
  }
  s.finish();
}

void read_coefficients(Section s, SinusoidalParams &c)
{
  s.number("base_mean", c.base_mean);
  s.number("base_amp", c.base_amp);
  s.number("base_freq", c.base_freq);
  s.number("pert_amp", c.pert_amp);
  s.number("pert_freq", c.pert_freq);
  if (s.has("pert_preset"))
  {
    std::string p;
    s.text("pert_preset", p);
    if (p == "sine")
      c.pert = PerturbationPreset::Sine;
    else if (p == "cosine")
      c.pert = PerturbationPreset::Cosine;
    else if (p == "zero")
      c.pert = PerturbationPreset::Zero;
    else
      fail(s.get("pert_preset"), s.field("pert_preset"), "expected 'sine', 'cosine' or 'zero'");
  }
  s.finish();
}

void read_integrator(Section s, IntegratorConfig &c)
{
  s.positive("dt", c.dt);
  if (s.has("scheme"))
  {
    std::string name;
    s.text("scheme", name);
    if (name == "strang")
      c.scheme = Scheme::StrangExponential;
    else if (name == "imex")
      c.scheme = Scheme::ImexMidpoint;
    else
      fail(s.get("scheme"), s.field("scheme"), "expected 'strang' or 'imex'");
  }
  s.integer("dealias_factor", c.dealias_factor, 1);
  s.integer("energy_log_stride", c.energy_log_stride, 1);
  s.finish();
}

void read_initial(Section s, InitialData &d)
{
  if (s.has("u"))
    d.u = s.numbers("u");
  if (s.has("p"))
    d.p = s.numbers("p");
  if (s.has("v"))
    d.v = s.numbers("v");
  if (s.has("q"))
    d.q = s.numbers("q");
  s.finish();
}

void read_verify(Section s, VerifyConfig &v)
{
  s.number("t", v.t);
  s.integer("t_grid_points", v.t_grid_points, 1);
  s.integer("beta_min_exp", v.beta_min_exp, -60);
  s.integer("beta_max_exp", v.beta_max_exp, -60);
  if (v.beta_max_exp < v.beta_min_exp)
  {
    fail(s.get("beta_max_exp"), s.field("beta_max_exp"), "must not be below beta_min_exp");
  }
  s.integer("beta_per_octave", v.beta_per_octave, 1);
  s.positive("semigroup_s_max", v.semigroup_s_max);
  s.integer("semigroup_s_points", v.semigroup_s_points, 2);
  if (s.has("process_windows"))
    v.process_windows = s.windows("process_windows");
  s.positive("process_dt", v.process_dt);
  s.number("translation_shift", v.translation_shift);
  s.positive("translation_window", v.translation_window);
  s.finish();
}

void read_attractor(Section s, AttractorSettings &a)
{
  s.number("t", a.t);
  s.positive("dt", a.dt);
  s.integer("samples", a.samples, 2);
  s.integer("leading_modes", a.leading_modes, 1);
  s.number("radius", a.radius);
  s.positive("T0", a.T0);
  s.integer("max_doublings", a.max_doublings, 0);
  s.positive("tol", a.tol);
  s.integer("refine_budget", a.refine_budget, 0);
  s.positive("horizon", a.horizon);
  s.positive("manifold_depth", a.manifold_depth);
  s.finish();
}

void read_tolerances(Section s, Tolerances &t)
{
  s.positive("dichotomy_gap", t.dichotomy_gap);
  s.positive("truncation_rel", t.truncation_rel);
  s.positive("hypothesis_step", t.hypothesis_step);
  s.positive("translation_per_unit_time", t.translation_per_unit_time);
  s.finish();
}

std::string preset_name(PerturbationPreset p)
{
  switch (p)
  {
    case PerturbationPreset::Sine:
      return "sine";
    case PerturbationPreset::Cosine:
      return "cosine";
    case PerturbationPreset::Zero:
      return "zero";
  }
  return "sine";
}

nlohmann::json windows_json(const std::vector<std::pair<double, double>> &w)
{
  nlohmann::json out = nlohmann::json::array();
  for (auto [a, b] : w)
  {
    out.push_back({a, b});
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string &text)
{
  YAML::Node root;
  try
  {
    root = YAML::Load(text);
  }
  catch (const YAML::ParserException &err)
  {
    const int line = err.mark.line >= 0 ? err.mark.line + 1 : -1;
    throw ConfigError("scenario:" + std::to_string(line) + ": malformed: " + err.msg, line);
  }
  if (!root || root.IsNull())
  {
    throw ConfigError("scenario: empty document", 1);
  }
  Scenario sc;
  Section s(root, "");
  s.text("name", sc.name);
  if (s.has("basis"))
    read_basis(s.child("basis"), sc.basis);
  s.positive("eta", sc.eta);
  if (s.has("nonlinearity"))
  {
    Section n = s.child("nonlinearity");
    n.text("preset", sc.nonlinearity.preset);
    if (sc.nonlinearity.preset != "cubic" && sc.nonlinearity.preset != "zero" && sc.nonlinearity.preset != "linear")
    {
      fail(n.get("preset"), n.field("preset"), "expected 'cubic', 'zero' or 'linear'");
    }
    n.number("mu", sc.nonlinearity.mu);
    n.finish();
  }
  if (s.has("coefficients"))
    read_coefficients(s.child("coefficients"), sc.coefficients);
  if (s.has("eps_list"))
  {
    sc.eps_list = s.numbers("eps_list");
    for (double e : sc.eps_list)
    {
      if (!(e >= 0.0 && e <= 1.0))
      {
        fail(s.get("eps_list"), "eps_list", "every eps must lie in [0, 1]");
      }
    }
  }
  if (s.has("time"))
  {
    Section t = s.child("time");
    t.number("tau", sc.time.tau);
    t.number("t_final", sc.time.t_final);
    if (!(sc.time.t_final > sc.time.tau))
    {
      fail(t.has("t_final") ? t.get("t_final") : s.get("time"), t.field("t_final"), "must exceed tau");
    }
    t.finish();
  }
  if (s.has("integrator"))
    read_integrator(s.child("integrator"), sc.integrator);
  if (s.has("initial"))
    read_initial(s.child("initial"), sc.initial);
  if (s.has("verify"))
    read_verify(s.child("verify"), sc.verify);
  if (s.has("linearize"))
  {
    Section l = s.child("linearize");
    l.positive("dt", sc.linearize.dt);
    if (l.has("windows"))
      sc.linearize.windows = l.windows("windows");
    l.finish();
  }
  if (s.has("dichotomy"))
  {
    Section d = s.child("dichotomy");
    d.positive("dt", sc.dichotomy.dt);
    d.finish();
  }
  if (s.has("attractor"))
    read_attractor(s.child("attractor"), sc.attractor);
  if (s.has("tolerances"))
    read_tolerances(s.child("tolerances"), sc.tolerances);
  if (s.has("rng_seed"))
  {
    const YAML::Node n = s.get("rng_seed");
    try
    {
      sc.rng_seed = n.as<std::uint64_t>();
    }
    catch (const YAML::Exception &)
    {
      fail(n, "rng_seed", "expected an unsigned 64-bit integer");
    }
  }
  s.text("output_dir", sc.output_dir);
  s.finish();
  return sc;
}

Scenario load_scenario(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ConfigError("cannot read scenario file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

nlohmann::json to_json(const Scenario &sc)
{
  const auto &b = sc.basis;
  const auto &c = sc.coefficients;
  const auto &v = sc.verify;
  const auto &a = sc.attractor;
  const auto &t = sc.tolerances;
  return {
      {"name", sc.name},
      {"basis",
       {{"kind", b.kind == DomainKind::Interval ? "interval" : "box"},
        {"n_modes", b.n_modes},
        {"modes_per_axis", b.modes_per_axis},
        {"lengths", b.lengths}}},
      {"eta", sc.eta},
      {"nonlinearity", {{"preset", sc.nonlinearity.preset}, {"mu", sc.nonlinearity.mu}}},
      {"coefficients",
       {{"base_mean", c.base_mean},
        {"base_amp", c.base_amp},
        {"base_freq", c.base_freq},
        {"pert_preset", preset_name(c.pert)},
        {"pert_amp", c.pert_amp},
        {"pert_freq", c.pert_freq}}},
      {"eps_list", sc.eps_list},
      {"time", {{"tau", sc.time.tau}, {"t_final", sc.time.t_final}}},
      {"integrator",
       {{"dt", sc.integrator.dt},
        {"scheme", sc.integrator.scheme == Scheme::StrangExponential ? "strang" : "imex"},
        {"dealias_factor", sc.integrator.dealias_factor},
        {"energy_log_stride", sc.integrator.energy_log_stride}}},
      {"initial", {{"u", sc.initial.u}, {"p", sc.initial.p}, {"v", sc.initial.v}, {"q", sc.initial.q}}},
      {"verify",
       {{"t", v.t},
        {"t_grid_points", v.t_grid_points},
        {"beta_min_exp", v.beta_min_exp},
        {"beta_max_exp", v.beta_max_exp},
        {"beta_per_octave", v.beta_per_octave},
        {"semigroup_s_max", v.semigroup_s_max},
        {"semigroup_s_points", v.semigroup_s_points},
        {"process_windows", windows_json(v.process_windows)},
        {"process_dt", v.process_dt},
        {"translation_shift", v.translation_shift},
        {"translation_window", v.translation_window}}},
      {"linearize", {{"dt", sc.linearize.dt}, {"windows", windows_json(sc.linearize.windows)}}},
      {"dichotomy", {{"dt", sc.dichotomy.dt}}},
      {"attractor",
       {{"t", a.t},
        {"dt", a.dt},
        {"samples", a.samples},
        {"leading_modes", a.leading_modes},
        {"radius", a.radius},
        {"T0", a.T0},
        {"max_doublings", a.max_doublings},
        {"tol", a.tol},
        {"refine_budget", a.refine_budget},
        {"horizon", a.horizon},
        {"manifold_depth", a.manifold_depth}}},
      {"tolerances",
       {{"dichotomy_gap", t.dichotomy_gap},
        {"truncation_rel", t.truncation_rel},
        {"hypothesis_step", t.hypothesis_step},
        {"translation_per_unit_time", t.translation_per_unit_time}}},
      {"rng_seed", sc.rng_seed},
      {"output_dir", sc.output_dir},
  };
}

std::string sha256_hex(const std::string &bytes)
{
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
  {
    throw NumericalFailure("sha256: digest failed");
  }
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i)
  {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string scenario_hash(const Scenario &scenario)
{
  // output_dir and seed overrides are part of the canonical form on purpose:
  // the hash identifies what produced an artifact
  return sha256_hex(to_json(scenario).dump());
}

EigenBasis make_basis(const Scenario &sc)
{
  if (sc.basis.kind == DomainKind::Interval)
  {
    return build_interval_basis(sc.basis.n_modes, sc.basis.lengths.at(0));
  }
  const auto &L = sc.basis.lengths;
  return build_box_basis(sc.basis.modes_per_axis, {L.at(0), L.at(1), L.at(2)});
}

CoefficientFamily make_family(const Scenario &sc)
{
  const auto &c = sc.coefficients;
  const double pert = c.pert == PerturbationPreset::Zero ? 0.0 : std::abs(c.pert_amp);
  const double lower = c.base_mean - std::abs(c.base_amp) - pert;
  if (!(lower > 0.0))
  {
    throw HypothesisViolation("coefficient lower bound a0 = " + std::to_string(lower) + " is not positive", 0.0,
                              1.0, lower);
  }
  return sinusoidal_family(c);
}

NonlinearitySpec make_nonlinearity(const Scenario &sc)
{
  if (sc.nonlinearity.preset == "zero")
    return zero_nonlinearity();
  if (sc.nonlinearity.preset == "linear")
    return linear_nonlinearity(sc.nonlinearity.mu);
  return cubic_nonlinearity(sc.nonlinearity.mu);
}

EvolutionContext make_context(const Scenario &sc, bool refined)
{
  EigenBasis basis = make_basis(sc);
  if (refined)
  {
    basis = refined_basis(basis);
  }
  return make_context(basis, sc.eta, make_family(sc), make_nonlinearity(sc), sc.integrator.dealias_factor);
}

ModalState initial_state(const Scenario &sc, const EigenBasis &basis)
{
  ModalState W(basis.size(), sc.time.tau);
  const std::vector<double> *parts[4] = {&sc.initial.u, &sc.initial.p, &sc.initial.v, &sc.initial.q};
  for (int c = 0; c < 4; ++c)
  {
    const int n = std::min<int>(basis.size(), static_cast<int>(parts[c]->size()));
    for (int k = 0; k < n; ++k)
    {
      W.flat()[4 * k + c] = (*parts[c])[k];
    }
  }
  return W;
}

std::vector<double> eps_grid(const Scenario &sc)
{
  std::vector<double> out = sc.eps_list;
  out.push_back(0.0);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Report> validate_hypotheses(const Scenario &sc)
{
  const CoefficientFamily family = make_family(sc);
  const double t_end = std::max({sc.time.t_final, sc.time.tau + 1.0, sc.verify.t});
  Report coef = verify_coefficient_hypotheses(family, eps_grid(sc), sc.time.tau, t_end, sc.tolerances.hypothesis_step);
  Report nonl = verify_nonlinearity_hypotheses(make_nonlinearity(sc), 10.0, 2001,
                                               sc.basis.kind == DomainKind::Interval ? 1 : 3);
  for (const Report *r : {&coef, &nonl})
  {
    for (const auto &row : r->rows)
    {
      if (!row.pass)
      {
        const double eps = row.parameters.value("eps", 0.0);
        throw HypothesisViolation(r->name + ": '" + row.estimate_id + "' = " + std::to_string(row.measured) +
                                      " against bound " + std::to_string(row.bound),
                                  std::nan(""), eps, row.measured);
      }
    }
  }
  return {coef, nonl};
}

}  // namespace sdwave
