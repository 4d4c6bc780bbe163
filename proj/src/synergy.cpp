#include "npmtune/synergy.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/parallel.hpp"

namespace npmtune {

using nlohmann::json;

std::string_view to_string(SynergyType type) {
  return type == SynergyType::IntraLevel ? "intra-level" : "inter-level";
}

SynergyType classify_synergy_type(const PassInfo& first, const PassInfo& second) {
  return first.level == second.level ? SynergyType::IntraLevel : SynergyType::InterLevel;
}

PipelineForest build_representative_skeleton(const PassInfo& first, const PassInfo& second) {
  PipelineNode a = PipelineNode::leaf(first.name, first.level);
  PipelineNode b = PipelineNode::leaf(second.name, second.level);
  PipelineForest forest;
  if (first.level == second.level) {
    forest.trees.push_back(wrap_tree(first.level, {std::move(a), std::move(b)}));
  } else if (first.level < second.level) {
    std::vector<PipelineNode> block;
    block.push_back(std::move(a));
    block.push_back(nest_block(first.level, second.level, {std::move(b)}));
    forest.trees.push_back(wrap_tree(first.level, std::move(block)));
  } else {
    forest.trees.push_back(minimal_wrap(first.name, first.level));
    forest.trees.push_back(minimal_wrap(second.name, second.level));
  }
  return forest;
}

std::vector<const SynergyEdge*> SynergyGraph::successors(std::string_view pass) const {
  std::vector<const SynergyEdge*> out;
  for (const SynergyEdge& edge : edges) {
    if (edge.from == pass) out.push_back(&edge);
  }
  return out;
}

void SynergyGraph::check(double tolerance) const {
  std::map<std::string, double> outgoing;
  const std::set<std::string> node_set(nodes.begin(), nodes.end());
  for (const SynergyEdge& edge : edges) {
    if (!(edge.weight >= 0.0 && edge.weight <= 1.0)) {
      throw Error(ErrorCode::SchemaError, "edge " + edge.from + "->" + edge.to +
                                              " has weight outside [0,1]");
    }
    if (!node_set.contains(edge.from) || !node_set.contains(edge.to)) {
      throw Error(ErrorCode::SchemaError,
                  "edge " + edge.from + "->" + edge.to + " references an unknown node");
    }
    outgoing[edge.from] += edge.weight;
  }
  for (const auto& [node, sum] : outgoing) {
    if (std::abs(sum - 1.0) > tolerance) {
      throw Error(ErrorCode::SchemaError,
                  "outgoing weights of '" + node + "' sum to " + std::to_string(sum));
    }
  }
  if (!start_weights.empty()) {
    double sum = 0.0;
    for (const auto& [pass, weight] : start_weights) {
      if (!(weight >= 0.0 && weight <= 1.0)) {
        throw Error(ErrorCode::SchemaError, "start weight of '" + pass + "' outside [0,1]");
      }
      sum += weight;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw Error(ErrorCode::SchemaError, "start weights sum to " + std::to_string(sum));
    }
  }
}

void SynergyCounts::record(const std::string& from, const std::string& to) {
  ++edges[{from, to}];
  ++initiators[from];
}

void SynergyCounts::merge(const SynergyCounts& other) {
  for (const auto& [key, count] : other.edges) edges[key] += count;
  for (const auto& [key, count] : other.initiators) initiators[key] += count;
}

SynergyGraph normalize_and_build(const SynergyCounts& counts, const PassRegistry& registry,
                                 GraphMeta meta) {
  SynergyGraph graph;
  graph.meta = std::move(meta);

  std::map<std::string, std::uint64_t> out_totals;
  std::set<std::string> nodes;
  for (const auto& [key, count] : counts.edges) {
    out_totals[key.first] += count;
    nodes.insert(key.first);
    nodes.insert(key.second);
  }
  graph.nodes.assign(nodes.begin(), nodes.end());
  for (const auto& [key, count] : counts.edges) {
    const auto& [from, to] = key;
    graph.edges.push_back(
        {from, to, classify_synergy_type(registry.at(from), registry.at(to)),
         static_cast<double>(count) / static_cast<double>(out_totals[from])});
  }

  std::uint64_t total = 0;
  for (const auto& [pass, count] : counts.initiators) total += count;
  for (const auto& [pass, count] : counts.initiators) {
    if (count > 0) {
      graph.start_weights[pass] = static_cast<double>(count) / static_cast<double>(total);
    }
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Mining

namespace {

void log_line(const MiningOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

struct Checkpoint {
  std::string registry_hash;
  std::vector<ProgramRef> dataset;
  std::set<ProgramRef> done;
  SynergyCounts counts;
};

json checkpoint_to_json(const Checkpoint& cp) {
  json edges = json::array();
  for (const auto& [key, count] : cp.counts.edges) edges.push_back({key.first, key.second, count});
  return {{"registry_hash", cp.registry_hash},
          {"dataset", cp.dataset},
          {"done", std::vector<ProgramRef>(cp.done.begin(), cp.done.end())},
          {"edges", edges},
          {"initiators", cp.counts.initiators}};
}

std::optional<Checkpoint> read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const json doc = json::parse(in);
    Checkpoint cp;
    cp.registry_hash = doc.at("registry_hash").get<std::string>();
    cp.dataset = doc.at("dataset").get<std::vector<ProgramRef>>();
    for (const json& id : doc.at("done")) cp.done.insert(id.get<ProgramRef>());
    for (const json& edge : doc.at("edges")) {
      cp.counts.edges[{edge.at(0).get<std::string>(), edge.at(1).get<std::string>()}] =
          edge.at(2).get<std::uint64_t>();
    }
    cp.counts.initiators = doc.at("initiators").get<std::map<std::string, std::uint64_t>>();
    return cp;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IOError, "cannot write checkpoint '" + tmp + "'");
    out << checkpoint_to_json(cp).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

SynergyCounts mine_program(const ProgramRef& program, const PassRegistry& registry,
                           const EvaluationBackend& backend, const MiningOptions& options,
                           MiningStats& stats) {
  SynergyCounts counts;
  const EvaluationResult original = backend.original_count(program);
  ++stats.evaluations;
  if (!original.ok()) {
    log_line(options, "skip " + program + ": original count failed: " + original.detail);
    return counts;
  }

  const std::vector<PassInfo>& passes = registry.entries();
  std::vector<std::optional<std::int64_t>> baseline(passes.size());
  parallel_for(passes.size(), options.parallel, [&](std::size_t i) {
    PipelineForest single;
    single.trees.push_back(minimal_wrap(passes[i].name, passes[i].level));
    const EvaluationResult r = backend.run(program, single);
    if (r.ok()) baseline[i] = original.instruction_count - r.instruction_count;
  });
  stats.evaluations += passes.size();

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < passes.size(); ++i) {
    if (baseline[i]) {
      usable.push_back(i);
    } else {
      log_line(options, "skip pass " + passes[i].name + " on " + program +
                            ": single-pass evaluation failed");
    }
  }
  stats.skipped_pairs += passes.size() * passes.size() - usable.size() * usable.size();

  const std::size_t pair_count = usable.size() * usable.size();
  std::vector<std::optional<std::int64_t>> combined(pair_count);
  parallel_for(pair_count, options.parallel, [&](std::size_t k) {
    const PassInfo& first = passes[usable[k / usable.size()]];
    const PassInfo& second = passes[usable[k % usable.size()]];
    const EvaluationResult r = backend.run(program, build_representative_skeleton(first, second));
    if (r.ok()) combined[k] = original.instruction_count - r.instruction_count;
  });
  stats.evaluations += pair_count;

  for (std::size_t k = 0; k < pair_count; ++k) {
    const std::size_t i = usable[k / usable.size()];
    const std::size_t j = usable[k % usable.size()];
    if (!combined[k]) {
      ++stats.skipped_pairs;
      log_line(options, "skip pair " + passes[i].name + "," + passes[j].name + " on " + program +
                            ": evaluation failed");
      continue;
    }
    if (*combined[k] > *baseline[i] + *baseline[j]) counts.record(passes[i].name, passes[j].name);
  }
  return counts;
}

SynergyGraph mine_synergies(const std::vector<ProgramRef>& dataset,
                            const PassRegistry& registry, const EvaluationBackend& backend,
                            const MiningOptions& options, MiningStats* stats_out) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidConfig, "mining dataset is empty");

  MiningStats stats;
  Checkpoint checkpoint{registry.content_hash(), dataset, {}, {}};
  if (!options.checkpoint_path.empty()) {
    if (auto saved = read_checkpoint(options.checkpoint_path)) {
      if (saved->registry_hash == checkpoint.registry_hash && saved->dataset == dataset) {
        checkpoint = std::move(*saved);
        stats.programs_resumed = checkpoint.done.size();
        log_line(options, "resuming: " + std::to_string(checkpoint.done.size()) +
                              " programs already mined");
      } else {
        log_line(options, "ignoring checkpoint for a different dataset or registry");
      }
    }
  }

  for (const ProgramRef& program : dataset) {
    if (checkpoint.done.contains(program)) continue;
    if (options.max_programs != 0 && stats.programs_processed >= options.max_programs) {
      stats.complete = false;
      break;
    }
    checkpoint.counts.merge(mine_program(program, registry, backend, options, stats));
    checkpoint.done.insert(program);
    ++stats.programs_processed;
    if (!options.checkpoint_path.empty()) write_checkpoint(options.checkpoint_path, checkpoint);
  }

  if (stats_out != nullptr) *stats_out = stats;
  return normalize_and_build(checkpoint.counts, registry,
                             {registry.content_hash(), dataset.size()});
}

// ---------------------------------------------------------------------------
// Persistence

std::string graph_to_json(const SynergyGraph& graph) {
  json edges = json::array();
  for (const SynergyEdge& e : graph.edges) {
    edges.push_back(
        {{"from", e.from}, {"to", e.to}, {"type", to_string(e.type)}, {"weight", e.weight}});
  }
  const json doc = {
      {"nodes", graph.nodes},
      {"edges", edges},
      {"start_weights", graph.start_weights},
      {"meta", {{"registry_hash", graph.meta.registry_hash},
                {"dataset_size", graph.meta.dataset_size}}},
  };
  return doc.dump(2);
}

SynergyGraph graph_from_json(std::string_view text) {
  SynergyGraph graph;
  try {
    const json doc = json::parse(text);
    graph.nodes = doc.at("nodes").get<std::vector<std::string>>();
    for (const json& e : doc.at("edges")) {
      const std::string type = e.at("type").get<std::string>();
      if (type != "intra-level" && type != "inter-level") {
        throw Error(ErrorCode::SchemaError, "unknown edge type '" + type + "'");
      }
      graph.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                             type == "intra-level" ? SynergyType::IntraLevel
                                                   : SynergyType::InterLevel,
                             e.at("weight").get<double>()});
    }
    graph.start_weights = doc.at("start_weights").get<std::map<std::string, double>>();
    if (doc.contains("meta")) {
      const json& meta = doc.at("meta");
      graph.meta.registry_hash = meta.value("registry_hash", std::string{});
      graph.meta.dataset_size = meta.value("dataset_size", std::size_t{0});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("synergy graph: ") + e.what());
  }
  graph.check();
  return graph;
}

void save_graph(const SynergyGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOError, "cannot write graph '" + path + "'");
  out << graph_to_json(graph) << '\n';
  if (!out) throw Error(ErrorCode::IOError, "failed writing graph '" + path + "'");
}

SynergyGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot read graph '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return graph_from_json(buf.str());
}

}  // namespace npmtune
