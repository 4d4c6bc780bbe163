#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "npmtune/evaluation.hpp"
#include "npmtune/pipeline.hpp"

namespace npmtune {

enum class SynergyType : std::uint8_t { IntraLevel, InterLevel };

std::string_view to_string(SynergyType type);

/// IntraLevel iff both passes live at the same level.
SynergyType classify_synergy_type(const PassInfo& first, const PassInfo& second);

/// The single skeleton used to measure a pair: both passes in one tree, the
/// second nested below the first when it is deeper, two sequential trees
/// when the second pass sits higher in the hierarchy.
PipelineForest build_representative_skeleton(const PassInfo& first, const PassInfo& second);

struct SynergyEdge {
  std::string from;
  std::string to;
  SynergyType type = SynergyType::IntraLevel;
  double weight = 0.0;

  friend bool operator==(const SynergyEdge&, const SynergyEdge&) = default;
};

struct GraphMeta {
  std::string registry_hash;
  std::size_t dataset_size = 0;

  friend bool operator==(const GraphMeta&, const GraphMeta&) = default;
};

/// Weighted directed graph of synergistic pass pairs. Outgoing weights of a
/// node sum to one, as do the start weights.
struct SynergyGraph {
  std::vector<std::string> nodes;         // sorted
  std::vector<SynergyEdge> edges;         // sorted by (from, to)
  std::map<std::string, double> start_weights;
  GraphMeta meta;

  [[nodiscard]] bool empty() const { return edges.empty(); }
  [[nodiscard]] std::vector<const SynergyEdge*> successors(std::string_view pass) const;
  /// Throws SchemaError when a normalization invariant does not hold.
  void check(double tolerance = 1e-9) const;

  friend bool operator==(const SynergyGraph&, const SynergyGraph&) = default;
};

/// Raw mining tallies; addition is commutative so programs can be merged in
/// any order.
struct SynergyCounts {
  std::map<std::pair<std::string, std::string>, std::uint64_t> edges;
  std::map<std::string, std::uint64_t> initiators;

  void record(const std::string& from, const std::string& to);
  void merge(const SynergyCounts& other);

  friend bool operator==(const SynergyCounts&, const SynergyCounts&) = default;
};

SynergyGraph normalize_and_build(const SynergyCounts& counts, const PassRegistry& registry,
                                 GraphMeta meta = {});

struct MiningOptions {
  unsigned parallel = 1;
  /// When set, tallies are written after every program and picked up again
  /// by a later run over the same dataset and registry.
  std::string checkpoint_path;
  /// Stop after this many newly processed programs (0 = no limit).
  std::size_t max_programs = 0;
  std::function<void(const std::string&)> log;
};

struct MiningStats {
  std::uint64_t evaluations = 0;
  std::uint64_t skipped_pairs = 0;
  std::size_t programs_processed = 0;
  std::size_t programs_resumed = 0;
  bool complete = true;
};

/// Single-program pass of the mining loop: original count, single-pass
/// baselines, then every ordered pair (self-pairs included) through its
/// representative skeleton. A pair is recorded when its combined reduction
/// strictly exceeds the sum of the individual reductions.
SynergyCounts mine_program(const ProgramRef& program, const PassRegistry& registry,
                           const EvaluationBackend& backend, const MiningOptions& options,
                           MiningStats& stats);

/// Throws InvalidConfig on an empty dataset; BackendUnavailable propagates.
SynergyGraph mine_synergies(const std::vector<ProgramRef>& dataset,
                            const PassRegistry& registry, const EvaluationBackend& backend,
                            const MiningOptions& options = {}, MiningStats* stats = nullptr);

std::string graph_to_json(const SynergyGraph& graph);
/// Throws SchemaError.
SynergyGraph graph_from_json(std::string_view text);
void save_graph(const SynergyGraph& graph, const std::string& path);
SynergyGraph load_graph(const std::string& path);

}  // namespace npmtune
