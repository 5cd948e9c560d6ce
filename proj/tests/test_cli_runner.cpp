// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "sdwave/errors.hpp"
#include "sdwave/runner.hpp"
#include "sdwave/scenario.hpp"

using namespace sdwave;
namespace fs = std::filesystem;

namespace
{

// Small but complete scenario: N = 4, short windows.
const char *kSmall = R"(name: small
basis: {kind: interval, n_modes: 4, lengths: [pi]}
eta: 1.0
nonlinearity: {preset: cubic, mu: 2.3}
coefficients: {base_mean: 2.0, base_amp: 0.5, base_freq: 1.0, pert_preset: PRESET, pert_amp: 1.0, pert_freq: 3.0}
eps_list: [0.2, 0.1, 0.05]
time: {tau: 0.0, t_final: 2.0}
integrator: {dt: 1.0e-3, scheme: strang, energy_log_stride: 10}
verify: {t_grid_points: 5, beta_per_octave: 1, semigroup_s_points: 5, translation_window: 1.0}
attractor: {dt: 2.0e-2, samples: 64, tol: 2.5e-3}
output_dir: unused
)";

std::string small(const std::string &preset = "sine")
{
  std::string s = kSmall;
  s.replace(s.find("PRESET"), 6, preset);
  return s;
}

fs::path scratch(const std::string &name)
{
  const fs::path p = fs::temp_directory_path() / ("sdwave_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path &path, const std::string &text)
{
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path &path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int cli(const std::string &args)
{
  const std::string cmd = std::string(SDWAVE_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json load_json(const fs::path &path)
{
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

RunResult run_in_process(const std::string &sub, const std::string &text, const fs::path &out, int jobs = 1,
                         bool audit = false)
{
  RunOptions opt;
  opt.subcommand = sub;
  opt.out_dir = out.string();
  opt.jobs = jobs;
  opt.truncation_audit = audit;
  std::ostringstream log;
  return run(parse_scenario(text), opt, log);
}

}  // namespace

TEST(Scenario, DefaultFileParses)
{
  const Scenario sc = load_scenario(std::string(SDWAVE_SOURCE_DIR) + "/scenarios/default.yaml");
  EXPECT_EQ(sc.basis.n_modes, 16);
  EXPECT_DOUBLE_EQ(sc.basis.lengths[0], std::numbers::pi);
  EXPECT_DOUBLE_EQ(sc.nonlinearity.mu, 2.3);
  EXPECT_EQ(sc.eps_list, (std::vector<double>{0.2, 0.1, 0.05}));
  EXPECT_EQ(eps_grid(sc), (std::vector<double>{0.0, 0.05, 0.1, 0.2}));
  EXPECT_NO_THROW(validate_hypotheses(sc));
}

TEST(Scenario, CanonicalFormRoundTripsThroughJson)
{
  const Scenario a = parse_scenario(small());
  const Scenario b = parse_scenario(to_json(a).dump());
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  // formatting does not enter the hash
  const Scenario c = parse_scenario(small() + "\n# trailing comment\n");
  EXPECT_EQ(scenario_hash(a), scenario_hash(c));
}

TEST(Scenario, Sha256KnownVector)
{
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Scenario, ErrorsCarryLineAndField)
{
  try
  {
    parse_scenario("eta: 1.0\nintegrator:\n  dt: fast\n");
    FAIL() << "expected ConfigError";
  }
  catch (const ConfigError &err)
  {
    EXPECT_EQ(err.line(), 3);
    EXPECT_NE(std::string(err.what()).find("integrator.dt"), std::string::npos);
  }
  try
  {
    parse_scenario("eta: 1.0\nbasis:\n  kind: interval\n  modes: 8\n");
    FAIL() << "expected ConfigError";
  }
  catch (const ConfigError &err)
  {
    EXPECT_EQ(err.line(), 4);
    EXPECT_NE(std::string(err.what()).find("basis.modes"), std::string::npos);
  }
  EXPECT_THROW(parse_scenario("eps_list: [0.5, 2.0]\n"), ConfigError);
  EXPECT_THROW(parse_scenario("time: {tau: 3, t_final: 1}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("eta: [1.0\n"), ConfigError);
}

TEST(Scenario, HypothesisViolationIsSeparate)
{
  const Scenario sc = parse_scenario("coefficients: {base_mean: 1.0, base_amp: 0.5, pert_amp: 1.0}\n");
  EXPECT_THROW(validate_hypotheses(sc), HypothesisViolation);
  const Scenario lin = parse_scenario("nonlinearity: {preset: linear, mu: 3.0}\n");
  EXPECT_THROW(validate_hypotheses(lin), HypothesisViolation);
}

TEST(Runner, OutputRootFromEnvironment)
{
  Scenario sc;
  sc.output_dir = "runs/a";
  ::setenv(kOutputRootEnv, "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir(sc, ""), fs::path("/tmp/root/runs/a"));
  EXPECT_EQ(resolve_output_dir(sc, "/elsewhere"), fs::path("/elsewhere"));
  sc.output_dir = "/abs";
  EXPECT_EQ(resolve_output_dir(sc, ""), fs::path("/abs"));
  ::unsetenv(kOutputRootEnv);
  sc.output_dir = "runs/a";
  EXPECT_EQ(resolve_output_dir(sc, ""), fs::path("runs/a"));
}

TEST(Cli, SimulateWritesTimeseriesAndManifest)
{
  const fs::path dir = scratch("simulate");
  const fs::path scen = write_file(dir / "s.yaml", small());
  ASSERT_EQ(cli("simulate --scenario " + scen.string() + " --out " + (dir / "out").string()), 0);
  ASSERT_TRUE(fs::exists(dir / "out" / "timeseries.csv"));
  const std::string csv = slurp(dir / "out" / "timeseries.csv");
  const std::string hash = scenario_hash(parse_scenario(small()));
  EXPECT_EQ(csv.rfind("# sdwave schema 1 scenario " + hash + "\n", 0), 0u);
  EXPECT_NE(csv.find("\neps,t,energy,dissipation_rate,norm_Y0,norm_Y1,u_0,u_1,u_2,u_3\n"), std::string::npos);

  const auto manifest = load_json(dir / "out" / "manifest.json");
  ASSERT_EQ(manifest["files"].size(), 3u);
  for (const auto &f : manifest["files"])
  {
    const std::string content = slurp(dir / "out" / f["name"].get<std::string>());
    EXPECT_EQ(f["sha256"].get<std::string>(), sha256_hex(content)) << f["name"];
    EXPECT_EQ(f["bytes"].get<std::size_t>(), content.size());
    EXPECT_EQ(f["scenario_hash"].get<std::string>(), hash);
  }
  const auto doc = load_json(dir / "out" / "simulate.json");
  EXPECT_EQ(doc["scenario_hash"].get<std::string>(), hash);
  for (const auto &r : doc["reports"])
  {
    for (const auto &row : r["rows"])
    {
      EXPECT_TRUE(row.contains("measured") && row.contains("bound") && row.contains("pass"));
    }
  }
}

TEST(Cli, ZeroPerturbationConvergenceRowsVanish)
{
  const fs::path dir = scratch("zero");
  const fs::path scen = write_file(dir / "s.yaml", small("zero"));
  ASSERT_EQ(cli("verify-estimates --scenario " + scen.string() + " --out " + (dir / "out").string()), 0);
  const auto doc = load_json(dir / "out" / "verify_estimates.json");
  EXPECT_TRUE(doc["pass"].get<bool>());
  int checked = 0;
  for (const auto &r : doc["reports"])
  {
    for (const auto &row : r["rows"])
    {
      const std::string id = row["estimate_id"];
      if (id == "difference" || id == "inverse_difference" || id == "semigroup_Y0" || id == "semigroup_Y0_Y1" ||
          id == "process_difference")
      {
        EXPECT_EQ(row["measured"].get<double>(), 0.0) << id;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 3 + 3 + 3 + 3 + 3);
}

TEST(Cli, ExitCodes)
{
  const fs::path dir = scratch("codes");
  const std::string out = " --out " + (dir / "out").string();
  const fs::path bad = write_file(dir / "bad.yaml", "eta: 1.0\nintegrator:\n  dt: -1\n");
  EXPECT_EQ(cli("simulate --scenario " + bad.string() + out), kExitConfig);
  EXPECT_EQ(cli("simulate --scenario " + (dir / "missing.yaml").string() + out), kExitConfig);
  const fs::path good = write_file(dir / "good.yaml", small());
  EXPECT_EQ(cli("levitate --scenario " + good.string() + out), kExitConfig);
  EXPECT_EQ(cli("simulate --scenario " + good.string() + " --jobs 0" + out), kExitConfig);
  const fs::path hyp = write_file(dir / "hyp.yaml", "coefficients: {base_mean: 1.0, base_amp: 0.5, pert_amp: 1.0}\n");
  EXPECT_EQ(cli("simulate --scenario " + hyp.string() + out), kExitHypothesis);
  // data far outside the blow-up guard
  const fs::path blow = write_file(dir / "blow.yaml", "basis: {n_modes: 4}\ninitial: {u: [1.0e9]}\n");
  EXPECT_EQ(cli("simulate --scenario " + blow.string() + out), kExitNumerical);
  // a spectral gap demand no multiplier can meet
  const fs::path gap = write_file(dir / "gap.yaml", "basis: {n_modes: 4}\ntolerances: {dichotomy_gap: 10.0}\n");
  EXPECT_EQ(cli("dichotomy --scenario " + gap.string() + out), kExitAssertion);
}

TEST(Cli, RepeatedRunsAreByteIdentical)
{
  const fs::path dir = scratch("repeat");
  const fs::path scen = write_file(dir / "s.yaml", small());
  for (const char *sub : {"simulate", "equilibria", "dichotomy"})
  {
    const std::string base = std::string(sub) + " --scenario " + scen.string() + " --out ";
    ASSERT_EQ(cli(base + (dir / "a").string()), 0) << sub;
    ASSERT_EQ(cli(base + (dir / "b").string() + " --jobs 3"), 0) << sub;
  }
  std::size_t compared = 0;
  for (const auto &e : fs::recursive_directory_iterator(dir / "a"))
  {
    if (!e.is_regular_file())
      continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_EQ(compared, 3u * 3u + 1u);
}

TEST(Cli, SeedOverrideEntersHash)
{
  const fs::path dir = scratch("seed");
  const fs::path scen = write_file(dir / "s.yaml", small());
  ASSERT_EQ(cli("equilibria --scenario " + scen.string() + " --seed 7 --out " + (dir / "out").string()), 0);
  const auto doc = load_json(dir / "out" / "equilibria.json");
  EXPECT_EQ(doc["scenario"]["rng_seed"].get<std::uint64_t>(), 7u);
  EXPECT_NE(doc["scenario_hash"].get<std::string>(), scenario_hash(parse_scenario(small())));
}

TEST(Runner, TruncationAuditPairsEveryRow)
{
  const fs::path dir = scratch("audit");
  const RunResult r = run_in_process("equilibria", small(), dir, 1, true);
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  const auto doc = load_json(dir / "equilibria.json");
  EXPECT_TRUE(doc["truncation_audit"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "refined" / "equilibria.csv"));
  for (const auto &rep : doc["reports"])
  {
    if (rep["report"] != "equilibrium_census")
      continue;
    for (const auto &row : rep["rows"])
    {
      ASSERT_TRUE(row["truncation_pair"].is_array());
    }
  }
  EXPECT_EQ(doc["refined"]["equilibria"].size(), doc["equilibria"].size());
}

TEST(Runner, ReportAggregatesEarlierRuns)
{
  const fs::path dir = scratch("report");
  ASSERT_EQ(run_in_process("equilibria", small("zero"), dir).exit_code, kExitOk);
  ASSERT_EQ(run_in_process("verify-estimates", small("zero"), dir).exit_code, kExitOk);
  const RunResult r = run_in_process("report", small("zero"), dir);
  EXPECT_EQ(r.exit_code, kExitOk) << r.message;
  const auto doc = load_json(dir / "report.json");
  EXPECT_EQ(doc["artifacts"].size(), 2u);
  const std::string csv = slurp(dir / "summary.csv");
  EXPECT_NE(csv.find("verify_estimates.json,imaginary_axis,imaginary_axis,"), std::string::npos);
  // the manifest keeps the files of all three runs
  const auto manifest = load_json(dir / "manifest.json");
  EXPECT_EQ(manifest["files"].size(), 3u + 2u + 3u);
}

TEST(Cli, SemicontinuityTableIsMonotone)
{
  const fs::path dir = scratch("semicontinuity");
  std::string text = small();
  text.replace(text.find("eps_list: [0.2, 0.1, 0.05]"), 26, "eps_list: [0.8, 0.4]");
  const fs::path scen = write_file(dir / "s.yaml", text);
  ASSERT_EQ(cli("semicontinuity --scenario " + scen.string() + " --out " + (dir / "out").string()), 0);
  std::ifstream in(dir / "out" / "semicontinuity.csv");
  std::string line;
  std::getline(in, line);  // comment
  std::getline(in, line);
  EXPECT_EQ(line, "eps,sup_a_distance,upper,lower");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line))
  {
    std::stringstream ss(line);
    std::vector<double> cells;
    for (std::string cell; std::getline(ss, cell, ',');)
      cells.push_back(std::stod(cell));
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[1][2], rows[0][2]);
  EXPECT_LT(rows[1][3], rows[0][3]);
  EXPECT_TRUE(fs::exists(dir / "out" / "section_eps_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "section_eps_0.4.csv"));
}
