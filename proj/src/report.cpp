// Copyright The sdwave Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdwave/report.hpp"

#include <algorithm>
#include <cmath>

#include "sdwave/errors.hpp"

namespace sdwave
{

namespace
{

// JSON has no inf/nan; keep them readable instead of emitting null.
nlohmann::json number(double x)
{
  if (std::isfinite(x))
  {
    return x;
  }
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

}  // namespace

nlohmann::json EstimateRecord::to_json() const
{
  nlohmann::json j = {{"estimate_id", estimate_id},
                      {"parameters", parameters},
                      {"measured", number(measured)},
                      {"bound", number(bound)},
                      {"pass", pass}};
  if (truncation_pair)
  {
    j["truncation_pair"] = {number(truncation_pair->first), number(truncation_pair->second)};
  }
  else
  {
    j["truncation_pair"] = nullptr;
  }
  return j;
}

EstimateRecord &Report::add(std::string id, double measured, double bound, bool pass, nlohmann::json parameters)
{
  rows.push_back({std::move(id), std::move(parameters), measured, bound, pass, std::nullopt});
  return rows.back();
}

bool Report::all_pass() const
{
  return std::all_of(rows.begin(), rows.end(), [](const auto &r) { return r.pass; });
}

const EstimateRecord &Report::row(const std::string &id) const
{
  for (const auto &r : rows)
  {
    if (r.estimate_id == id)
    {
      return r;
    }
  }
  throw InvalidArgument("report '" + name + "' has no row '" + id + "'");
}

std::vector<const EstimateRecord *> Report::rows_with(const std::string &id) const
{
  std::vector<const EstimateRecord *> out;
  for (const auto &r : rows)
  {
    if (r.estimate_id == id)
    {
      out.push_back(&r);
    }
  }
  return out;
}

void attach_truncation(Report &coarse, const Report &fine, double rel_tol)
{
  if (coarse.rows.size() != fine.rows.size())
  {
    throw InvalidArgument("attach_truncation: reports have different row counts");
  }
  bool stable = true;
  for (std::size_t i = 0; i < coarse.rows.size(); ++i)
  {
    auto &c = coarse.rows[i];
    const auto &f = fine.rows[i];
    if (c.estimate_id != f.estimate_id)
    {
      throw InvalidArgument("attach_truncation: row mismatch at '" + c.estimate_id + "'");
    }
    c.truncation_pair = std::make_pair(c.measured, f.measured);
    const double scale = std::max(std::abs(c.measured), std::abs(f.measured));
    if (scale > 0.0 && !(std::abs(c.measured - f.measured) <= rel_tol * scale))
    {
      stable = false;
    }
  }
  coarse.details["truncation_stable"] = stable;
  coarse.details["truncation_rel_tol"] = rel_tol;
}

nlohmann::json Report::to_json() const
{
  nlohmann::json j;
  j["report"] = name;
  j["pass"] = all_pass();
  j["rows"] = nlohmann::json::array();
  for (const auto &r : rows)
  {
    j["rows"].push_back(r.to_json());
  }
  j["warnings"] = warnings;
  j["details"] = details;
  return j;
}

}  // namespace sdwave
