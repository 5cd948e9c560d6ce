// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: sdwave <subcommand> --scenario PATH [options].
// Exit codes: 0 ok, 2 configuration, 3 hypothesis violation, 4 numerical
// failure, 5 failed assertion.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sdwave/runner.hpp"

int main(int argc, char **argv)
{
  CLI::App app{"Strongly damped coupled wave system: simulation and estimate verification"};
  app.set_version_flag("--version", "sdwave schema " + std::to_string(sdwave::kSchemaVersion));

  sdwave::RunOptions opt;
  std::uint64_t seed = 0;
  app.add_option("subcommand", opt.subcommand, "What to run")
      ->required()
      ->check(CLI::IsMember(sdwave::subcommands()));
  app.add_option("--scenario", opt.scenario_path, "Scenario file (YAML or JSON)")->required();
  app.add_option("--out", opt.out_dir,
                 std::string("Output directory (default: the scenario's output_dir, under $") +
                     sdwave::kOutputRootEnv + " when set)");
  app.add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto *seed_opt = app.add_option("--seed", seed, "Override the scenario rng_seed");
  app.add_flag("--truncation-audit", opt.truncation_audit, "Repeat the run at twice the modes and pair the values");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &err)
  {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : sdwave::kExitConfig;
  }
  if (*seed_opt)
  {
    opt.seed = seed;
  }
  return sdwave::run(opt, std::cerr).exit_code;
}
