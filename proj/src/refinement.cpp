#include "npmtune/refinement.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/parallel.hpp"
#include "npmtune/random.hpp"

namespace npmtune {

std::uint64_t PartitionProblem::space_size() const {
  if (decision_points.size() >= 64) return std::numeric_limits<std::uint64_t>::max();
  return std::uint64_t{1} << decision_points.size();
}

PartitionProblem decision_points(std::vector<TypedPass> sequence) {
  PartitionProblem problem;
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    if (sequence[i].level == sequence[i + 1].level) problem.decision_points.push_back(i);
  }
  problem.sequence = std::move(sequence);
  return problem;
}

PipelineForest decode(const PartitionProblem& problem, const PartitionChromosome& bits) {
  if (bits.size() != problem.decision_points.size()) {
    throw Error(ErrorCode::ChromosomeLengthMismatch,
                "chromosome has " + std::to_string(bits.size()) + " bits, expected " +
                    std::to_string(problem.decision_points.size()));
  }
  PipelineForest forest;
  if (problem.sequence.empty()) return forest;

  struct Block {
    PassLevel level;
    std::vector<PipelineNode> leaves;
  };
  std::vector<Block> blocks;
  std::size_t next_point = 0;
  for (std::size_t i = 0; i < problem.sequence.size(); ++i) {
    const TypedPass& pass = problem.sequence[i];
    bool cut = true;
    if (i > 0 && problem.sequence[i - 1].level == pass.level) {
      cut = bits[next_point++];
    }
    if (cut) blocks.push_back({pass.level, {}});
    blocks.back().leaves.push_back(PipelineNode::leaf(pass.name, pass.level));
  }

  PipelineNode tree = PipelineNode::manager(PassLevel::Module);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Block& block = blocks[b];
    if (block.level != PassLevel::Module) {
      tree.children.push_back(nest_block(PassLevel::Module, block.level, std::move(block.leaves)));
      continue;
    }
    if (b > 0 && blocks[b - 1].level == PassLevel::Module) {
      forest.trees.push_back(std::move(tree));
      tree = PipelineNode::manager(PassLevel::Module);
    }
    for (PipelineNode& leaf : block.leaves) tree.children.push_back(std::move(leaf));
  }
  forest.trees.push_back(std::move(tree));
  return forest;
}

std::pair<PartitionProblem, PartitionChromosome> encode(const PipelineForest& forest) {
  PartitionProblem problem = decision_points(leaf_sequence(forest));
  const std::vector<NodePath> leaves = leaf_paths(forest);
  PartitionChromosome bits;
  bits.reserve(problem.decision_points.size());
  for (std::size_t i : problem.decision_points) {
    const NodePath& a = leaves[i];
    const NodePath& b = leaves[i + 1];
    const bool same_parent = a.size() == b.size() && std::equal(a.begin(), a.end() - 1, b.begin());
    bits.push_back(!same_parent);
  }
  return {std::move(problem), std::move(bits)};
}

void RefineConfig::check() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (population_size < 1) fail("refine population_size must be at least 1");
  if (tournament_size < 1) fail("refine tournament_size must be at least 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) fail("refine crossover_rate must be in [0,1]");
  if (mutation_rate && !(*mutation_rate >= 0.0 && *mutation_rate <= 1.0)) {
    fail("refine mutation_rate must be in [0,1]");
  }
}

namespace {

struct Candidate {
  std::string key;
  PipelineForest forest;
  std::optional<std::int64_t> ic;
};

/// Lower count wins; failures lose to everything; equal counts compare by string.
bool better(const Candidate& a, const Candidate& b) {
  if (a.ic.has_value() != b.ic.has_value()) return a.ic.has_value();
  if (a.ic && *a.ic != *b.ic) return *a.ic < *b.ic;
  return a.key < b.key;
}

class Evaluator {
 public:
  Evaluator(const ProgramRef& program, const EvaluationBackend& backend, unsigned parallel)
      : program_(program), backend_(backend), parallel_(parallel) {}

  std::vector<Candidate> run(std::vector<PipelineForest> forests) {
    std::vector<Candidate> out(forests.size());
    std::vector<std::size_t> pending;
    std::set<std::string> queued;
    for (std::size_t i = 0; i < forests.size(); ++i) {
      out[i].key = print_pipeline(forests[i]);
      out[i].forest = std::move(forests[i]);
      if (!cache_.contains(out[i].key) && queued.insert(out[i].key).second) pending.push_back(i);
    }
    std::vector<std::optional<std::int64_t>> scores(pending.size());
    parallel_for(pending.size(), parallel_, [&](std::size_t k) {
      const EvaluationResult r = backend_.run(program_, out[pending[k]].forest);
      if (r.ok()) scores[k] = r.instruction_count;
    });
    for (std::size_t k = 0; k < pending.size(); ++k) cache_[out[pending[k]].key] = scores[k];
    used_ += pending.size();
    for (Candidate& c : out) c.ic = cache_.at(c.key);
    return out;
  }

  [[nodiscard]] std::uint64_t used() const { return used_; }

 private:
  const ProgramRef& program_;
  const EvaluationBackend& backend_;
  unsigned parallel_;
  std::map<std::string, std::optional<std::int64_t>> cache_;
  std::uint64_t used_ = 0;
};

Candidate exhaustive_best(const PartitionProblem& problem, Evaluator& evaluator) {
  const std::size_t k = problem.decision_points.size();
  std::vector<PipelineForest> forests;
  forests.reserve(std::size_t{1} << k);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    PartitionChromosome bits(k);
    for (std::size_t j = 0; j < k; ++j) bits[j] = ((mask >> j) & 1U) != 0;
    forests.push_back(decode(problem, bits));
  }
  std::vector<Candidate> all = evaluator.run(std::move(forests));
  return *std::min_element(all.begin(), all.end(), better);
}

Candidate genetic_best(const PartitionProblem& problem, const PartitionChromosome& seed_bits,
                       const RefineConfig& config, Evaluator& evaluator) {
  const std::size_t k = problem.decision_points.size();
  const double flip = config.mutation_rate.value_or(1.0 / static_cast<double>(k));
  Rng rng(config.seed);

  std::vector<PartitionChromosome> population{seed_bits};
  while (population.size() < config.population_size) {
    PartitionChromosome bits(k);
    for (std::size_t j = 0; j < k; ++j) bits[j] = rng.chance(0.5);
    population.push_back(std::move(bits));
  }

  auto score = [&](const std::vector<PartitionChromosome>& pop) {
    std::vector<PipelineForest> forests;
    forests.reserve(pop.size());
    for (const PartitionChromosome& bits : pop) forests.push_back(decode(problem, bits));
    return evaluator.run(std::move(forests));
  };

  std::vector<Candidate> scored = score(population);
  Candidate best = *std::min_element(scored.begin(), scored.end(), better);

  auto tournament = [&]() -> std::size_t {
    std::size_t winner = rng.index(population.size());
    for (std::size_t t = 1; t < config.tournament_size; ++t) {
      const std::size_t challenger = rng.index(population.size());
      if (better(scored[challenger], scored[winner])) winner = challenger;
    }
    return winner;
  };

  for (std::size_t generation = 0; generation < config.generations; ++generation) {
    const auto elite = static_cast<std::size_t>(
        std::min_element(scored.begin(), scored.end(), better) - scored.begin());
    std::vector<PartitionChromosome> next{population[elite]};
    while (next.size() < config.population_size) {
      PartitionChromosome a = population[tournament()];
      PartitionChromosome b = population[tournament()];
      if (k > 1 && rng.chance(config.crossover_rate)) {
        const std::size_t point = 1 + rng.index(k - 1);
        for (std::size_t j = point; j < k; ++j) {
          const bool tmp = a[j];
          a[j] = b[j];
          b[j] = tmp;
        }
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (rng.chance(flip)) a[j] = !a[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (rng.chance(flip)) b[j] = !b[j];
      }
      next.push_back(std::move(a));
      if (next.size() < config.population_size) next.push_back(std::move(b));
    }
    population = std::move(next);
    scored = score(population);
    const Candidate& gen_best = *std::min_element(scored.begin(), scored.end(), better);
    if (better(gen_best, best)) best = gen_best;
  }
  return best;
}

}  // namespace

RefineReport refine(const PipelineForest& seed, const ProgramRef& program,
                    const EvaluationBackend& backend, const RefineConfig& config) {
  config.check();
  Evaluator evaluator(program, backend, config.parallel);

  RefineReport report;
  report.seed = seed;
  std::vector<PipelineForest> seed_only{seed};
  const Candidate seed_candidate = evaluator.run(std::move(seed_only)).front();
  report.seed_ic = seed_candidate.ic;
  report.refined = seed;
  report.refined_ic = seed_candidate.ic;

  auto [problem, seed_bits] = encode(seed);
  report.decision_point_count = problem.decision_points.size();
  if (problem.decision_points.empty()) {
    report.evaluations_used = evaluator.used();
    return report;
  }

  report.exhaustive = problem.space_size() <= config.exhaustive_budget;
  const Candidate best = report.exhaustive
                             ? exhaustive_best(problem, evaluator)
                             : genetic_best(problem, seed_bits, config, evaluator);
  const bool improves =
      best.ic && (!seed_candidate.ic || *best.ic < *seed_candidate.ic);
  if (improves) {
    report.refined = best.forest;
    report.refined_ic = best.ic;
  }
  report.evaluations_used = evaluator.used();
  return report;
}

std::string refine_report_json(const RefineReport& report) {
  auto count = [](const std::optional<std::int64_t>& ic) -> nlohmann::json {
    return ic ? nlohmann::json(*ic) : nlohmann::json(nullptr);
  };
  const nlohmann::json doc = {
      {"seed_pipeline", print_pipeline(report.seed)},
      {"seed_ic", count(report.seed_ic)},
      {"refined_pipeline", print_pipeline(report.refined)},
      {"refined_ic", count(report.refined_ic)},
      {"decision_point_count", report.decision_point_count},
      {"evaluations_used", report.evaluations_used},
  };
  return doc.dump(2);
}

}  // namespace npmtune
