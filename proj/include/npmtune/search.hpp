#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npmtune/evaluation.hpp"
#include "npmtune/pipeline.hpp"
#include "npmtune/random.hpp"
#include "npmtune/synergy.hpp"

namespace npmtune {

struct SearchConfig {
  std::size_t population_size = 50;
  std::size_t generations = 20;
  std::size_t max_sequence_length = 24;
  double crossover_rate = 0.9;
  double mutation_rate = 0.3;
  std::size_t tournament_size = 3;
  std::size_t elitism = 1;
  std::uint64_t seed = 0;
  /// Concurrent backend invocations; never changes the result.
  unsigned parallel = 1;

  /// Throws InvalidConfig.
  void check() const;
};

struct Individual {
  PipelineForest forest;
  std::optional<std::int64_t> fitness;  // IC_orig - IC
};

/// Places `pass` right after the leaf at `anchor` and returns the new leaf's
/// path. Same level: next sibling. Deeper: a fresh adaptor chain right after
/// the anchor. Shallower: a new tree after the anchor's tree. Polymorphic
/// passes take the anchor's manager level.
NodePath place_after(PipelineForest& forest, const NodePath& anchor, const PassInfo& pass);

/// Synergy-guided random walk; falls back to random_init when the graph has
/// no start passes.
Individual weighted_walk_init(const SynergyGraph& graph, const PassRegistry& registry,
                              const SearchConfig& config, Rng& rng);

/// Knowledge-blind construction: a random length in [1, max] of uniformly
/// drawn passes chained with place_after.
Individual random_init(const PassRegistry& registry, const SearchConfig& config, Rng& rng);

/// Swaps the subtree at `path_a` in `a` with the one at `path_b` in `b`.
/// Returns nullopt when either offspring fails validation.
std::optional<std::pair<PipelineForest, PipelineForest>> swap_subtrees(
    const PipelineForest& a, const NodePath& path_a, const PipelineForest& b,
    const NodePath& path_b, const PassRegistry& registry);

/// Random manager-rooted subtree exchange; nullopt is the discarded case.
std::optional<std::pair<Individual, Individual>> crossover(const Individual& parent_a,
                                                           const Individual& parent_b,
                                                           const PassRegistry& registry,
                                                           Rng& rng);

/// Anchor mutation: a random leaf's synergy partner is inserted after it or
/// replaces the following leaf; without partners a random pass is inserted,
/// or the anchor is swapped for a random pass of its manager's level.
Individual mutate(const Individual& individual, const SynergyGraph& graph,
                  const PassRegistry& registry, Rng& rng);

struct GenerationRecord {
  std::size_t generation = 0;
  std::int64_t best_fitness = 0;
  double mean_fitness = 0.0;
  std::string best_pipeline;
};

struct SearchResult {
  Individual best;
  std::int64_t original_ic = 0;
  std::vector<GenerationRecord> log;
  std::uint64_t evaluations = 0;
};

/// Fitness of a failed evaluation: strictly below any real outcome.
inline std::int64_t failed_fitness(std::int64_t original_ic) { return -original_ic - 1; }

/// Throws EvaluationFailed when the original program cannot be measured.
SearchResult run_search(const ProgramRef& program, const SynergyGraph& graph,
                        const PassRegistry& registry, const EvaluationBackend& backend,
                        const SearchConfig& config);

std::string search_log_jsonl(const std::vector<GenerationRecord>& log);

}  // namespace npmtune
