#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npmtune/evaluation.hpp"
#include "npmtune/refinement.hpp"
#include "npmtune/search.hpp"

namespace npmtune {

enum class PairStructure : std::uint8_t { Micro, Meso, Macro, Nested, Phased };

std::string_view to_string(PairStructure structure);

struct PairVariant {
  PairStructure structure = PairStructure::Micro;
  PipelineForest forest;
};

/// Same-level pairs: Micro (one manager), Meso (sibling managers in one tree,
/// not defined for two module passes), Macro (two trees). Cross-level pairs:
/// Nested (one tree) and Phased (two trees).
std::vector<PairVariant> pair_variants(const PassInfo& first, const PassInfo& second);

struct MicroRow {
  ProgramRef program;
  std::string first;
  std::string second;
  bool intra = true;
  std::vector<std::pair<PairStructure, std::optional<std::int64_t>>> counts;
  bool agree = true;
};

struct MicroStudy {
  std::vector<MicroRow> rows;
  std::size_t agreeing = 0;
  [[nodiscard]] double agreement_fraction() const;
};

MicroStudy run_microstructure_study(const std::vector<std::pair<std::string, std::string>>& pairs,
                                    const std::vector<ProgramRef>& programs,
                                    const PassRegistry& registry,
                                    const EvaluationBackend& backend, unsigned parallel = 1);

std::string microstructure_table(const MicroStudy& study);
std::string microstructure_json(const MicroStudy& study);

struct Rq3Result {
  SearchResult guided;
  SearchResult unguided;
};

/// Runs the search twice with one config and seed: once with `graph`, once
/// with an empty graph so initialization and mutation are uniform.
Rq3Result run_rq3_ablation(const ProgramRef& program, const SynergyGraph& graph,
                           const PassRegistry& registry, const EvaluationBackend& backend,
                           const SearchConfig& config);

std::string rq3_table(const Rq3Result& result);
std::string rq3_json(const Rq3Result& result);

struct Rq4Result {
  SearchResult search;
  RefineReport refinement;
  std::int64_t main_ga_ic = 0;
  std::int64_t refined_ic = 0;
  /// overoz(main_ga_ic, refined_ic): percentage the refinement removed.
  double gain = 0.0;
};

Rq4Result run_rq4_ablation(const ProgramRef& program, const SynergyGraph& graph,
                           const PassRegistry& registry, const EvaluationBackend& backend,
                           const SearchConfig& search_config, const RefineConfig& refine_config);

std::string rq4_table(const Rq4Result& result);
std::string rq4_json(const Rq4Result& result);

}  // namespace npmtune
