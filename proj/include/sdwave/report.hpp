// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SDWAVE_REPORT_HPP
#define SDWAVE_REPORT_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sdwave
{

// One checked inequality: measured value against its bound.
struct EstimateRecord
{
  std::string estimate_id;
  nlohmann::json parameters = nlohmann::json::object();
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  // values of the measured quantity at truncations (N, 2N), when audited
  std::optional<std::pair<double, double>> truncation_pair;

  nlohmann::json to_json() const;
};

struct Report
{
  std::string name;
  std::vector<EstimateRecord> rows;
  std::vector<std::string> warnings;
  // free-form tables (e.g. per-eps columns) for plotting
  nlohmann::json details = nlohmann::json::object();

  EstimateRecord &add(std::string id, double measured, double bound, bool pass,
                      nlohmann::json parameters = nlohmann::json::object());

  bool all_pass() const;
  // first row with the id; throws InvalidArgument if absent
  const EstimateRecord &row(const std::string &id) const;
  std::vector<const EstimateRecord *> rows_with(const std::string &id) const;

  nlohmann::json to_json() const;
};

// Copies the measured values of `fine` (same rows, same order) into the
// truncation pairs of `coarse` and sets details["truncation_stable"] when every
// pair agrees within rel_tol.
void attach_truncation(Report &coarse, const Report &fine, double rel_tol = 0.15);

}  // namespace sdwave

#endif  // SDWAVE_REPORT_HPP
