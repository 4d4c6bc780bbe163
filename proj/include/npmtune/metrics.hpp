#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace npmtune {

/// Percentage of extra reduction over the -Oz count; negative when worse.
/// Throws InvalidBaseline when ic_oz is not positive.
double overoz(std::int64_t ic_oz, std::int64_t ic_tuned);

struct ProgramResult {
  std::string program_id;
  std::string group;
  std::int64_t ic_oz = 0;
  std::int64_t ic_tuned = 0;
  double overoz_pct = 0.0;
};

ProgramResult make_result(std::string program_id, std::string group, std::int64_t ic_oz,
                          std::int64_t ic_tuned);

struct GroupSummary {
  std::string group;
  std::size_t programs = 0;
  double mean_overoz = 0.0;
};

struct Report {
  std::vector<GroupSummary> groups;  // first-appearance order
  /// Unweighted mean over the group means.
  double mean_of_group_means = 0.0;
  /// Unweighted mean over every program.
  double grand_mean = 0.0;
  std::vector<ProgramResult> programs;
};

/// Throws InvalidConfig on an empty result list.
Report aggregate(const std::vector<ProgramResult>& results);

/// Accepts either a bare array or {"results": [...]} of objects with
/// program, ic_oz, ic_tuned and an optional group. Throws SchemaError.
std::vector<ProgramResult> parse_results_json(std::string_view text);

std::string report_table(const Report& report);
std::string report_json(const Report& report);

}  // namespace npmtune
