// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_RUNNER_HPP
#define SDWAVE_RUNNER_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdwave/scenario.hpp"

namespace sdwave
{

enum ExitCode : int
{
  kExitOk = 0,
  kExitConfig = 2,
  kExitHypothesis = 3,
  kExitNumerical = 4,
  kExitAssertion = 5
};

// Environment variable naming the root for relative output directories.
inline constexpr const char *kOutputRootEnv = "SDWAVE_OUTPUT_ROOT";
// Bumped whenever a CSV column or JSON field changes meaning.
inline constexpr int kSchemaVersion = 1;

struct RunOptions
{
  std::string subcommand;
  std::string scenario_path;
  std::string out_dir;  // empty: the scenario's output_dir
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool truncation_audit = false;
};

struct RunResult
{
  int exit_code = kExitOk;
  std::filesystem::path out_dir;
  std::vector<std::string> files;  // relative to out_dir, manifest last
  std::string message;
};

const std::vector<std::string> &subcommands();
// simulate and equilibria only emit data; the others (report included, which
// aggregates the rows of earlier runs) gate the exit status on failed rows.
bool is_verification(const std::string &subcommand);

// --out wins; otherwise output_dir, taken relative to $SDWAVE_OUTPUT_ROOT
// when that is set and the path is relative.
std::filesystem::path resolve_output_dir(const Scenario &scenario, const std::string &out_override);

// Loads the scenario and runs. Never throws: failures map onto the exit codes.
RunResult run(const RunOptions &options, std::ostream &log);
// Same with an already parsed scenario.
RunResult run(const Scenario &scenario, const RunOptions &options, std::ostream &log);

}  // namespace sdwave

#endif  // SDWAVE_RUNNER_HPP
