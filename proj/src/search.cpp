#include "npmtune/search.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/parallel.hpp"

namespace npmtune {

void SearchConfig::check() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (population_size < 1) fail("population_size must be at least 1");
  if (max_sequence_length < 1) fail("max_sequence_length must be at least 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) fail("crossover_rate must be in [0,1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) fail("mutation_rate must be in [0,1]");
  if (tournament_size < 1) fail("tournament_size must be at least 1");
  if (elitism > population_size) fail("elitism exceeds population_size");
}

NodePath place_after(PipelineForest& forest, const NodePath& anchor, const PassInfo& pass) {
  const NodePath parent_path(anchor.begin(), anchor.end() - 1);
  PipelineNode& parent = node_at(forest, parent_path);
  const PassLevel host = parent.level;
  const PassLevel level = pass.polymorphic ? host : pass.level;
  const std::size_t pos = anchor.back() + 1;

  if (level == host) {
    parent.children.insert(parent.children.begin() + static_cast<std::ptrdiff_t>(pos),
                           PipelineNode::leaf(pass.name, level));
    NodePath path = parent_path;
    path.push_back(pos);
    return path;
  }
  if (level > host) {
    const std::size_t depth = adaptor_chain(host, level).size();
    parent.children.insert(parent.children.begin() + static_cast<std::ptrdiff_t>(pos),
                           nest_block(host, level, {PipelineNode::leaf(pass.name, level)}));
    NodePath path = parent_path;
    path.push_back(pos);
    path.insert(path.end(), depth, 0);
    return path;
  }
  const std::size_t tree = anchor.front() + 1;
  forest.trees.insert(forest.trees.begin() + static_cast<std::ptrdiff_t>(tree),
                      minimal_wrap(pass.name, level));
  NodePath path{tree};
  const std::size_t depth = level == PassLevel::Module ? 0 : adaptor_chain(PassLevel::Module, level).size();
  path.insert(path.end(), depth + 1, 0);
  return path;
}

namespace {

PipelineForest single_pass_forest(const PassInfo& pass) {
  PipelineForest forest;
  forest.trees.push_back(minimal_wrap(pass.name, pass.level));
  return forest;
}

const PassInfo& uniform_pass(const PassRegistry& registry, Rng& rng) {
  if (registry.empty()) throw Error(ErrorCode::InvalidConfig, "pass registry is empty");
  return registry.entries()[rng.index(registry.size())];
}

const SynergyEdge& pick_edge(const std::vector<const SynergyEdge*>& edges, Rng& rng) {
  std::vector<double> weights;
  weights.reserve(edges.size());
  for (const SynergyEdge* e : edges) weights.push_back(e->weight);
  return *edges[rng.weighted(weights)];
}

}  // namespace

Individual random_init(const PassRegistry& registry, const SearchConfig& config, Rng& rng) {
  const std::size_t length = 1 + rng.index(config.max_sequence_length);
  Individual out;
  out.forest = single_pass_forest(uniform_pass(registry, rng));
  NodePath at = leaf_paths(out.forest).front();
  for (std::size_t i = 1; i < length; ++i) at = place_after(out.forest, at, uniform_pass(registry, rng));
  return out;
}

Individual weighted_walk_init(const SynergyGraph& graph, const PassRegistry& registry,
                              const SearchConfig& config, Rng& rng) {
  if (graph.start_weights.empty()) return random_init(registry, config, rng);

  std::vector<std::string> starts;
  std::vector<double> weights;
  for (const auto& [pass, weight] : graph.start_weights) {
    starts.push_back(pass);
    weights.push_back(weight);
  }
  std::string current = starts[rng.weighted(weights)];

  Individual out;
  out.forest = single_pass_forest(registry.at(current));
  NodePath at = leaf_paths(out.forest).front();
  for (std::size_t count = 1; count < config.max_sequence_length; ++count) {
    const auto successors = graph.successors(current);
    if (successors.empty()) break;
    current = pick_edge(successors, rng).to;
    at = place_after(out.forest, at, registry.at(current));
  }
  return out;
}

std::optional<std::pair<PipelineForest, PipelineForest>> swap_subtrees(
    const PipelineForest& a, const NodePath& path_a, const PipelineForest& b,
    const NodePath& path_b, const PassRegistry& registry) {
  PipelineForest child_a = a;
  PipelineForest child_b = b;
  node_at(child_a, path_a) = node_at(b, path_b);
  node_at(child_b, path_b) = node_at(a, path_a);
  if (!validate(child_a, registry).ok() || !validate(child_b, registry).ok()) return std::nullopt;
  return std::pair{std::move(child_a), std::move(child_b)};
}

std::optional<std::pair<Individual, Individual>> crossover(const Individual& parent_a,
                                                           const Individual& parent_b,
                                                           const PassRegistry& registry,
                                                           Rng& rng) {
  const auto managers_a = manager_paths(parent_a.forest);
  const auto managers_b = manager_paths(parent_b.forest);
  if (managers_a.empty() || managers_b.empty()) return std::nullopt;
  const NodePath& pa = managers_a[rng.index(managers_a.size())];
  const NodePath& pb = managers_b[rng.index(managers_b.size())];
  auto swapped = swap_subtrees(parent_a.forest, pa, parent_b.forest, pb, registry);
  if (!swapped) return std::nullopt;
  return std::pair{Individual{std::move(swapped->first), std::nullopt},
                   Individual{std::move(swapped->second), std::nullopt}};
}

Individual mutate(const Individual& individual, const SynergyGraph& graph,
                  const PassRegistry& registry, Rng& rng) {
  Individual out{individual.forest, std::nullopt};
  const std::vector<NodePath> leaves = leaf_paths(out.forest);
  if (leaves.empty()) return out;
  const std::size_t a = rng.index(leaves.size());
  const NodePath& anchor = leaves[a];
  const auto partners = graph.successors(node_at(out.forest, anchor).pass);

  if (!partners.empty()) {
    const PassInfo& partner = registry.at(pick_edge(partners, rng).to);
    const bool insert = rng.chance(0.5);
    if (insert || a + 1 == leaves.size()) {
      place_after(out.forest, anchor, partner);
      return out;
    }
    const NodePath& next = leaves[a + 1];
    PipelineNode& next_parent = node_at(out.forest, NodePath(next.begin(), next.end() - 1));
    if (partner.polymorphic || partner.level == next_parent.level) {
      PipelineNode& leaf = next_parent.children[next.back()];
      leaf.pass = partner.name;
      leaf.level = next_parent.level;
      return out;
    }
    next_parent.children.erase(next_parent.children.begin() +
                               static_cast<std::ptrdiff_t>(next.back()));
    prune_empty(out.forest);
    place_after(out.forest, anchor, partner);
    return out;
  }

  if (rng.chance(0.5)) {
    place_after(out.forest, anchor, uniform_pass(registry, rng));
    return out;
  }
  PipelineNode& parent = node_at(out.forest, NodePath(anchor.begin(), anchor.end() - 1));
  std::vector<const PassInfo*> candidates;
  for (const PassInfo& info : registry.entries()) {
    if (info.polymorphic || info.level == parent.level) candidates.push_back(&info);
  }
  if (candidates.empty()) return out;
  PipelineNode& leaf = parent.children[anchor.back()];
  leaf.pass = candidates[rng.index(candidates.size())]->name;
  leaf.level = parent.level;
  return out;
}

SearchResult run_search(const ProgramRef& program, const SynergyGraph& graph,
                        const PassRegistry& registry, const EvaluationBackend& backend,
                        const SearchConfig& config) {
  config.check();
  const EvaluationResult original = backend.original_count(program);
  if (!original.ok()) {
    throw Error(ErrorCode::EvaluationFailed,
                "cannot measure original program '" + program + "': " + original.detail);
  }

  SearchResult result;
  result.original_ic = original.instruction_count;
  const std::int64_t worst = failed_fitness(result.original_ic);
  std::map<std::string, std::int64_t> cache;

  auto evaluate_all = [&](std::vector<Individual>& population) {
    std::vector<std::string> keys;
    keys.reserve(population.size());
    std::vector<std::size_t> pending;
    std::set<std::string> queued;
    for (std::size_t i = 0; i < population.size(); ++i) {
      keys.push_back(print_pipeline(population[i].forest));
      if (!cache.contains(keys[i]) && queued.insert(keys[i]).second) pending.push_back(i);
    }
    std::vector<std::int64_t> scores(pending.size());
    parallel_for(pending.size(), config.parallel, [&](std::size_t k) {
      const EvaluationResult r = backend.run(program, population[pending[k]].forest);
      scores[k] = r.ok() ? result.original_ic - r.instruction_count : worst;
    });
    for (std::size_t k = 0; k < pending.size(); ++k) cache[keys[pending[k]]] = scores[k];
    result.evaluations += pending.size();
    for (std::size_t i = 0; i < population.size(); ++i) population[i].fitness = cache[keys[i]];
  };

  bool have_best = false;
  auto record = [&](std::size_t generation, const std::vector<Individual>& population) {
    double sum = 0.0;
    for (const Individual& ind : population) {
      sum += static_cast<double>(*ind.fitness);
      if (!have_best || *ind.fitness > *result.best.fitness) {
        result.best = ind;
        have_best = true;
      }
    }
    result.log.push_back({generation, *result.best.fitness,
                          sum / static_cast<double>(population.size()),
                          print_pipeline(result.best.forest)});
  };

  Rng rng(config.seed);
  std::vector<Individual> population;
  population.reserve(config.population_size);
  for (std::size_t i = 0; i < config.population_size; ++i) {
    population.push_back(weighted_walk_init(graph, registry, config, rng));
  }
  evaluate_all(population);
  record(0, population);

  auto tournament = [&](const std::vector<Individual>& pool) -> const Individual& {
    std::size_t winner = rng.index(pool.size());
    for (std::size_t t = 1; t < config.tournament_size; ++t) {
      const std::size_t challenger = rng.index(pool.size());
      if (*pool[challenger].fitness > *pool[winner].fitness) winner = challenger;
    }
    return pool[winner];
  };

  for (std::size_t generation = 1; generation <= config.generations; ++generation) {
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return *population[x].fitness > *population[y].fitness;
    });

    std::vector<Individual> next;
    next.reserve(config.population_size);
    for (std::size_t e = 0; e < config.elitism; ++e) next.push_back(population[order[e]]);

    while (next.size() < config.population_size) {
      Individual first = tournament(population);
      Individual second = tournament(population);
      if (rng.chance(config.crossover_rate)) {
        if (auto children = crossover(first, second, registry, rng)) {
          first = std::move(children->first);
          second = std::move(children->second);
          trim_to_length(first.forest, config.max_sequence_length);
          trim_to_length(second.forest, config.max_sequence_length);
        }
      }
      if (rng.chance(config.mutation_rate)) {
        first = mutate(first, graph, registry, rng);
        trim_to_length(first.forest, config.max_sequence_length);
      }
      if (rng.chance(config.mutation_rate)) {
        second = mutate(second, graph, registry, rng);
        trim_to_length(second.forest, config.max_sequence_length);
      }
      next.push_back(std::move(first));
      if (next.size() < config.population_size) next.push_back(std::move(second));
    }
    population = std::move(next);
    evaluate_all(population);
    record(generation, population);
  }
  return result;
}

std::string search_log_jsonl(const std::vector<GenerationRecord>& log) {
  std::string out;
  for (const GenerationRecord& r : log) {
    const nlohmann::json line = {{"generation", r.generation},
                                 {"best_fitness", r.best_fitness},
                                 {"mean_fitness", r.mean_fitness},
                                 {"best_pipeline_string", r.best_pipeline}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace npmtune
