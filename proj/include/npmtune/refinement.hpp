#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npmtune/evaluation.hpp"
#include "npmtune/pipeline.hpp"

namespace npmtune {

/// A fixed pass sequence whose structure is searched. Boundary i sits between
/// sequence[i] and sequence[i + 1]; it is a decision point iff both passes
/// share a level.
struct PartitionProblem {
  std::vector<TypedPass> sequence;
  std::vector<std::size_t> decision_points;

  /// 2^|D|, saturating at UINT64_MAX.
  [[nodiscard]] std::uint64_t space_size() const;
};

/// One bit per decision point: false joins, true splits.
using PartitionChromosome = std::vector<bool>;

PartitionProblem decision_points(std::vector<TypedPass> sequence);

/// Cuts at every heterogeneous boundary and at every set bit, then lays the
/// blocks out as sibling managers in one module tree. Module-level blocks sit
/// directly in the tree; two module blocks separated by a split go to
/// consecutive trees. Throws ChromosomeLengthMismatch.
PipelineForest decode(const PartitionProblem& problem, const PartitionChromosome& bits);

/// Bit i is clear iff the two leaves around decision point i share a parent.
std::pair<PartitionProblem, PartitionChromosome> encode(const PipelineForest& forest);

struct RefineConfig {
  /// Exhaustive enumeration when 2^|D| is at most this.
  std::uint64_t exhaustive_budget = 4096;
  std::size_t population_size = 16;
  std::size_t generations = 10;
  double crossover_rate = 0.9;
  /// Per-bit flip probability; 1/|D| when unset.
  std::optional<double> mutation_rate;
  std::size_t tournament_size = 3;
  std::uint64_t seed = 0;
  unsigned parallel = 1;

  /// Throws InvalidConfig.
  void check() const;
};

struct RefineReport {
  PipelineForest seed;
  std::optional<std::int64_t> seed_ic;  // nullopt when the seed failed to evaluate
  PipelineForest refined;
  std::optional<std::int64_t> refined_ic;
  std::size_t decision_point_count = 0;
  std::uint64_t evaluations_used = 0;
  bool exhaustive = true;
};

/// Searches the partition space of `seed`'s leaf sequence. The seed is always
/// measured and is only replaced by a strictly lower count; ties between
/// candidates go to the lexicographically smaller pipeline string.
RefineReport refine(const PipelineForest& seed, const ProgramRef& program,
                    const EvaluationBackend& backend, const RefineConfig& config = {});

std::string refine_report_json(const RefineReport& report);

}  // namespace npmtune
