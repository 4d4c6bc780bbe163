#include "npmtune/metrics.hpp"

#include <cstdio>
#include <map>

#include "json.hpp"
#include "npmtune/error.hpp"

namespace npmtune {

double overoz(std::int64_t ic_oz, std::int64_t ic_tuned) {
  if (ic_oz <= 0) {
    throw Error(ErrorCode::InvalidBaseline,
                "-Oz instruction count must be positive, got " + std::to_string(ic_oz));
  }
  return static_cast<double>(ic_oz - ic_tuned) / static_cast<double>(ic_oz) * 100.0;
}

ProgramResult make_result(std::string program_id, std::string group, std::int64_t ic_oz,
                          std::int64_t ic_tuned) {
  return {std::move(program_id), std::move(group), ic_oz, ic_tuned, overoz(ic_oz, ic_tuned)};
}

Report aggregate(const std::vector<ProgramResult>& results) {
  if (results.empty()) throw Error(ErrorCode::InvalidConfig, "no results to aggregate");
  Report report;
  report.programs = results;

  std::map<std::string, std::size_t> index;
  std::vector<double> sums;
  double total = 0.0;
  for (const ProgramResult& r : results) {
    auto [it, inserted] = index.try_emplace(r.group, report.groups.size());
    if (inserted) {
      report.groups.push_back({r.group, 0, 0.0});
      sums.push_back(0.0);
    }
    ++report.groups[it->second].programs;
    sums[it->second] += r.overoz_pct;
    total += r.overoz_pct;
  }
  double sum_of_means = 0.0;
  for (std::size_t g = 0; g < report.groups.size(); ++g) {
    report.groups[g].mean_overoz = sums[g] / static_cast<double>(report.groups[g].programs);
    sum_of_means += report.groups[g].mean_overoz;
  }
  report.mean_of_group_means = sum_of_means / static_cast<double>(report.groups.size());
  report.grand_mean = total / static_cast<double>(results.size());
  return report;
}

std::vector<ProgramResult> parse_results_json(std::string_view text) {
  std::vector<ProgramResult> out;
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    const nlohmann::json& rows = doc.is_array() ? doc : doc.at("results");
    for (const nlohmann::json& row : rows) {
      out.push_back(make_result(row.at("program").get<std::string>(),
                                row.value("group", std::string{"default"}),
                                row.at("ic_oz").get<std::int64_t>(),
                                row.at("ic_tuned").get<std::int64_t>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("results file: ") + e.what());
  }
  return out;
}

namespace {

std::string format_row(const std::string& name, const std::string& count, double value) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %8s %10.2f\n", name.c_str(), count.c_str(), value);
  return buf;
}

}  // namespace

std::string report_table(const Report& report) {
  std::string out;
  char header[160];
  std::snprintf(header, sizeof header, "%-28s %8s %10s\n", "group", "programs", "overoz%");
  out += header;
  for (const GroupSummary& g : report.groups) {
    out += format_row(g.group, std::to_string(g.programs), g.mean_overoz);
  }
  out += format_row("mean of group means", std::to_string(report.groups.size()),
                    report.mean_of_group_means);
  out += format_row("mean over programs", std::to_string(report.programs.size()),
                    report.grand_mean);
  return out;
}

std::string report_json(const Report& report) {
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupSummary& g : report.groups) {
    groups.push_back({{"group", g.group}, {"programs", g.programs}, {"mean_overoz", g.mean_overoz}});
  }
  nlohmann::json programs = nlohmann::json::array();
  for (const ProgramResult& p : report.programs) {
    programs.push_back({{"program", p.program_id},
                        {"group", p.group},
                        {"ic_oz", p.ic_oz},
                        {"ic_tuned", p.ic_tuned},
                        {"overoz", p.overoz_pct}});
  }
  const nlohmann::json doc = {{"groups", groups},
                              {"mean_of_group_means", report.mean_of_group_means},
                              {"grand_mean", report.grand_mean},
                              {"programs", programs}};
  return doc.dump(2);
}

}  // namespace npmtune
