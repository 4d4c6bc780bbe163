#include "npmtune/experiments.hpp"

#include <cstdio>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/metrics.hpp"
#include "npmtune/parallel.hpp"

namespace npmtune {

using nlohmann::json;

std::string_view to_string(PairStructure structure) {
  switch (structure) {
    case PairStructure::Micro: return "micro";
    case PairStructure::Meso: return "meso";
    case PairStructure::Macro: return "macro";
    case PairStructure::Nested: return "nested";
    case PairStructure::Phased: return "phased";
  }
  return "unknown";
}

namespace {

PipelineNode leaf_of(const PassInfo& pass) { return PipelineNode::leaf(pass.name, pass.level); }

/// The pass as an element of a module manager: the leaf itself or its chain.
PipelineNode module_element(const PassInfo& pass) {
  if (pass.level == PassLevel::Module) return leaf_of(pass);
  return nest_block(PassLevel::Module, pass.level, {leaf_of(pass)});
}

PipelineForest two_trees(const PassInfo& first, const PassInfo& second) {
  PipelineForest forest;
  forest.trees.push_back(minimal_wrap(first.name, first.level));
  forest.trees.push_back(minimal_wrap(second.name, second.level));
  return forest;
}

}  // namespace

std::vector<PairVariant> pair_variants(const PassInfo& first, const PassInfo& second) {
  std::vector<PairVariant> out;
  if (first.level == second.level) {
    out.push_back({PairStructure::Micro, build_representative_skeleton(first, second)});
    if (first.level != PassLevel::Module) {
      PipelineForest meso;
      meso.trees.push_back(
          PipelineNode::manager(PassLevel::Module, {module_element(first), module_element(second)}));
      out.push_back({PairStructure::Meso, std::move(meso)});
    }
    out.push_back({PairStructure::Macro, two_trees(first, second)});
    return out;
  }
  PipelineForest nested;
  if (first.level < second.level) {
    nested = build_representative_skeleton(first, second);
  } else {
    nested.trees.push_back(
        PipelineNode::manager(PassLevel::Module, {module_element(first), module_element(second)}));
  }
  out.push_back({PairStructure::Nested, std::move(nested)});
  out.push_back({PairStructure::Phased, two_trees(first, second)});
  return out;
}

double MicroStudy::agreement_fraction() const {
  return rows.empty() ? 1.0 : static_cast<double>(agreeing) / static_cast<double>(rows.size());
}

MicroStudy run_microstructure_study(const std::vector<std::pair<std::string, std::string>>& pairs,
                                    const std::vector<ProgramRef>& programs,
                                    const PassRegistry& registry,
                                    const EvaluationBackend& backend, unsigned parallel) {
  MicroStudy study;
  for (const ProgramRef& program : programs) {
    for (const auto& [a, b] : pairs) {
      const PassInfo& first = registry.at(a);
      const PassInfo& second = registry.at(b);
      MicroRow row{program, a, b, first.level == second.level, {}, true};
      const std::vector<PairVariant> variants = pair_variants(first, second);
      std::vector<std::optional<std::int64_t>> counts(variants.size());
      parallel_for(variants.size(), parallel, [&](std::size_t i) {
        const EvaluationResult r = backend.run(program, variants[i].forest);
        if (r.ok()) counts[i] = r.instruction_count;
      });
      for (std::size_t i = 0; i < variants.size(); ++i) {
        row.counts.emplace_back(variants[i].structure, counts[i]);
        if (counts[i] != counts.front()) row.agree = false;
      }
      if (row.agree) ++study.agreeing;
      study.rows.push_back(std::move(row));
    }
  }
  return study;
}

std::string microstructure_table(const MicroStudy& study) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %-24s %-24s %s\n", "program", "pair", "counts", "agree");
  out += line;
  for (const MicroRow& row : study.rows) {
    std::string counts;
    for (const auto& [structure, ic] : row.counts) {
      if (!counts.empty()) counts += ' ';
      counts += std::string(to_string(structure)) + "=" + (ic ? std::to_string(*ic) : "fail");
    }
    const std::string pair = row.first + "," + row.second;
    std::snprintf(line, sizeof line, "%-20s %-24s %-24s %s\n", row.program.c_str(), pair.c_str(),
                  counts.c_str(), row.agree ? "yes" : "NO");
    out += line;
  }
  std::snprintf(line, sizeof line, "agreement: %zu/%zu (%.2f%%)\n", study.agreeing,
                study.rows.size(), study.agreement_fraction() * 100.0);
  out += line;
  return out;
}

std::string microstructure_json(const MicroStudy& study) {
  json rows = json::array();
  for (const MicroRow& row : study.rows) {
    json counts = json::object();
    for (const auto& [structure, ic] : row.counts) {
      counts[std::string(to_string(structure))] = ic ? json(*ic) : json(nullptr);
    }
    rows.push_back({{"program", row.program},
                    {"first", row.first},
                    {"second", row.second},
                    {"type", row.intra ? "intra-level" : "inter-level"},
                    {"counts", counts},
                    {"agree", row.agree}});
  }
  return json{{"rows", rows},
              {"agreeing", study.agreeing},
              {"total", study.rows.size()},
              {"agreement_fraction", study.agreement_fraction()}}
      .dump(2);
}

Rq3Result run_rq3_ablation(const ProgramRef& program, const SynergyGraph& graph,
                           const PassRegistry& registry, const EvaluationBackend& backend,
                           const SearchConfig& config) {
  Rq3Result result;
  result.guided = run_search(program, graph, registry, backend, config);
  result.unguided = run_search(program, SynergyGraph{}, registry, backend, config);
  return result;
}

namespace {

json trajectory(const SearchResult& r) {
  json out = json::array();
  for (const GenerationRecord& g : r.log) out.push_back(g.best_fitness);
  return out;
}

}  // namespace

std::string rq3_table(const Rq3Result& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-14s %-12s %s\n", "gen", "guided", "unguided", "");
  out += line;
  const std::size_t n = std::max(result.guided.log.size(), result.unguided.log.size());
  for (std::size_t g = 0; g < n; ++g) {
    const auto cell = [&](const SearchResult& r) {
      return g < r.log.size() ? std::to_string(r.log[g].best_fitness) : std::string("-");
    };
    std::snprintf(line, sizeof line, "%-10zu %-14s %-12s\n", g, cell(result.guided).c_str(),
                  cell(result.unguided).c_str());
    out += line;
  }
  const double base = static_cast<double>(result.guided.original_ic);
  const auto pct = [&](const SearchResult& r) {
    return base > 0 ? static_cast<double>(*r.best.fitness) / base * 100.0 : 0.0;
  };
  std::snprintf(line, sizeof line,
                "reduction%%  guided %.2f  unguided %.2f  (corpus reference: 0.76 vs -8.29)\n",
                pct(result.guided), pct(result.unguided));
  out += line;
  return out;
}

std::string rq3_json(const Rq3Result& result) {
  const auto side = [](const SearchResult& r) {
    return json{{"best_pipeline", print_pipeline(r.best.forest)},
                {"best_fitness", *r.best.fitness},
                {"evaluations", r.evaluations},
                {"trajectory", trajectory(r)}};
  };
  return json{{"original_ic", result.guided.original_ic},
              {"guided", side(result.guided)},
              {"unguided", side(result.unguided)}}
      .dump(2);
}

Rq4Result run_rq4_ablation(const ProgramRef& program, const SynergyGraph& graph,
                           const PassRegistry& registry, const EvaluationBackend& backend,
                           const SearchConfig& search_config, const RefineConfig& refine_config) {
  Rq4Result result;
  result.search = run_search(program, graph, registry, backend, search_config);
  result.refinement = refine(result.search.best.forest, program, backend, refine_config);
  if (!result.refinement.seed_ic) {
    throw Error(ErrorCode::EvaluationFailed, "best pipeline of the search failed to evaluate");
  }
  result.main_ga_ic = *result.refinement.seed_ic;
  result.refined_ic = *result.refinement.refined_ic;
  result.gain = result.main_ga_ic > 0 ? overoz(result.main_ga_ic, result.refined_ic) : 0.0;
  return result;
}

std::string rq4_table(const Rq4Result& result) {
  char gain[96];
  std::snprintf(gain, sizeof gain, "%.4f", result.gain);
  std::string out;
  out += "original IC      " + std::to_string(result.search.original_ic) + "\n";
  out += "main GA IC       " + std::to_string(result.main_ga_ic) + "  " +
         print_pipeline(result.refinement.seed) + "\n";
  out += "refined IC       " + std::to_string(result.refined_ic) + "  " +
         print_pipeline(result.refinement.refined) + "\n";
  out += "decision points  " + std::to_string(result.refinement.decision_point_count) + "\n";
  out += std::string("gain%            ") + gain + "  (corpus reference: 13.08 -> 13.62)\n";
  return out;
}

std::string rq4_json(const Rq4Result& result) {
  return json{{"original_ic", result.search.original_ic},
              {"main_ga_pipeline", print_pipeline(result.refinement.seed)},
              {"main_ga_ic", result.main_ga_ic},
              {"refined_pipeline", print_pipeline(result.refinement.refined)},
              {"refined_ic", result.refined_ic},
              {"decision_point_count", result.refinement.decision_point_count},
              {"gain", result.gain}}
      .dump(2);
}

}  // namespace npmtune
