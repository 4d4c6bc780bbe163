#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/evaluation.hpp"
#include "npmtune/experiments.hpp"
#include "npmtune/metrics.hpp"
#include "npmtune/pass_registry.hpp"
#include "npmtune/pipeline.hpp"
#include "npmtune/refinement.hpp"
#include "npmtune/search.hpp"
#include "npmtune/synergy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace npmtune;

namespace {

constexpr int kOk = 0;
constexpr int kInvalidInput = 1;
constexpr int kEnvironment = 2;
constexpr int kEvaluationFailure = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::IOError:
      return kEnvironment;
    case ErrorCode::Timeout:
    case ErrorCode::EvaluationFailed:
      return kEvaluationFailure;
    default:
      return kInvalidInput;
  }
}

struct Options {
  std::string registry_path;
  std::string evaluator = "auto";
  std::string opt_path;
  long timeout_ms = 60'000;
  unsigned parallel = 1;
  bool json_output = false;
  std::uint64_t seed = 0;
};

PassRegistry load_registry_option(const Options& opts) {
  if (opts.registry_path.empty()) return default_registry();
  return load_registry_file(opts.registry_path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOError, "cannot write '" + path + "'");
  out << text;
}

bool is_mock_program(const std::string& path) { return fs::path(path).extension() == ".json"; }

std::string resolve_evaluator(const Options& opts, const std::vector<std::string>& programs) {
  if (opts.evaluator != "auto") return opts.evaluator;
  const bool all_mock = !programs.empty() && std::all_of(programs.begin(), programs.end(), is_mock_program);
  return all_mock ? "mock" : "opt";
}

std::unique_ptr<EvaluationBackend> make_backend(const Options& opts,
                                                const std::vector<std::string>& programs) {
  const std::string kind = resolve_evaluator(opts, programs);
  if (kind == "mock") {
    auto backend = std::make_unique<MockBackend>();
    for (const std::string& path : programs) backend->add(path, load_mock_program(path));
    return backend;
  }
  if (kind == "opt") {
    OptConfig config = OptConfig::from_environment(
        opts.opt_path.empty() ? std::nullopt : std::optional<std::string>(opts.opt_path));
    config.timeout = std::chrono::milliseconds(opts.timeout_ms);
    return std::make_unique<OptBackend>(config);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown evaluator '" + kind + "'");
}

std::vector<std::string> list_dataset(const std::string& dir, const std::string& evaluator) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IOError, "'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    const bool take = evaluator == "mock"  ? ext == ".json"
                      : evaluator == "opt" ? (ext == ".ll" || ext == ".bc")
                                           : (ext == ".json" || ext == ".ll" || ext == ".bc");
    if (take) files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::IOError, "no programs found in '" + dir + "'");
  return files;
}

SynergyGraph load_graph_option(const std::string& path) {
  return path.empty() ? SynergyGraph{} : load_graph(path);
}

// ---------------------------------------------------------------------------

int cmd_validate(const Options& opts, const std::string& text) {
  const PassRegistry registry = load_registry_option(opts);
  try {
    const PipelineForest forest = parse_pipeline(text, registry);
    const ValidationReport report = validate(forest, registry);
    if (!report.ok()) throw Error(ErrorCode::InvalidPipeline, report.to_string());
    if (opts.json_output) {
      std::cout << json{{"valid", true}, {"pipeline", print_pipeline(forest)}}.dump(2) << '\n';
    } else {
      std::cout << "valid\n";
    }
    return kOk;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IOError) throw;
    if (opts.json_output) {
      std::cout << json{{"valid", false}, {"error", to_string(e.code())}, {"message", e.what()}}.dump(2)
                << '\n';
    } else {
      std::cout << "invalid: " << e.what() << '\n';
    }
    return kInvalidInput;
  }
}

int cmd_fmt(const Options& opts, const std::string& text) {
  const PassRegistry registry = load_registry_option(opts);
  const PipelineForest forest = parse_pipeline(text, registry);
  const StructuralMetrics metrics = structural_metrics(forest);
  if (opts.json_output) {
    json leaves = json::array();
    for (const TypedPass& p : leaf_sequence(forest)) {
      leaves.push_back({{"pass", p.name}, {"level", to_string(p.level)}});
    }
    std::cout << json{{"pipeline", print_pipeline(forest)},
                      {"trees", metrics.tree_count},
                      {"max_depth", metrics.max_depth},
                      {"widths", metrics.widths},
                      {"leaves", leaves}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << print_pipeline(forest) << '\n';
  }
  return kOk;
}

struct MineArgs {
  std::string dataset;
  std::string output = "graph.json";
  std::string checkpoint;
  std::size_t stop_after = 0;
};

int cmd_mine(const Options& opts, const MineArgs& args) {
  const PassRegistry registry = load_registry_option(opts);
  const std::vector<std::string> dataset = list_dataset(args.dataset, opts.evaluator);
  const auto backend = make_backend(opts, dataset);

  MiningOptions mining;
  mining.parallel = opts.parallel;
  mining.checkpoint_path = args.checkpoint;
  mining.max_programs = args.stop_after;
  mining.log = [](const std::string& line) { std::cerr << line << '\n'; };
  MiningStats stats;
  const SynergyGraph graph = mine_synergies(dataset, registry, *backend, mining, &stats);

  if (!stats.complete) {
    const std::size_t done = stats.programs_resumed + stats.programs_processed;
    if (opts.json_output) {
      std::cout << json{{"complete", false}, {"programs_done", done}, {"programs", dataset.size()}}.dump(2)
                << '\n';
    } else {
      std::cout << "stopped after " << done << "/" << dataset.size()
                << " programs; rerun with the same checkpoint to resume\n";
    }
    return kOk;
  }
  save_graph(graph, args.output);
  if (opts.json_output) {
    std::cout << json{{"complete", true},
                      {"output", args.output},
                      {"nodes", graph.nodes.size()},
                      {"edges", graph.edges.size()},
                      {"programs", dataset.size()},
                      {"evaluations", stats.evaluations}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << "mined " << dataset.size() << " programs: " << graph.nodes.size() << " nodes, "
              << graph.edges.size() << " edges -> " << args.output << '\n';
  }
  return kOk;
}

struct SearchArgs {
  std::string program;
  std::string graph;
  std::string log_path;
  SearchConfig config;
};

int cmd_search(const Options& opts, SearchArgs args) {
  const PassRegistry registry = load_registry_option(opts);
  const auto backend = make_backend(opts, {args.program});
  const SynergyGraph graph = load_graph_option(args.graph);
  args.config.seed = opts.seed;
  args.config.parallel = opts.parallel;
  const SearchResult result = run_search(args.program, graph, registry, *backend, args.config);
  if (!args.log_path.empty()) write_file(args.log_path, search_log_jsonl(result.log));

  const std::int64_t fitness = *result.best.fitness;
  const std::string pipeline = print_pipeline(result.best.forest);
  if (opts.json_output) {
    const SearchConfig& c = args.config;
    std::cout << json{{"program", args.program},
                      {"original_ic", result.original_ic},
                      {"best_pipeline", pipeline},
                      {"best_fitness", fitness},
                      {"best_ic", result.original_ic - fitness},
                      {"evaluations", result.evaluations},
                      {"config",
                       {{"population_size", c.population_size},
                        {"generations", c.generations},
                        {"max_sequence_length", c.max_sequence_length},
                        {"crossover_rate", c.crossover_rate},
                        {"mutation_rate", c.mutation_rate},
                        {"tournament_size", c.tournament_size},
                        {"elitism", c.elitism},
                        {"seed", c.seed}}}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << pipeline << '\n' << "fitness " << fitness << '\n';
  }
  return kOk;
}

struct RefineArgs {
  std::string program;
  std::string pipeline;
  RefineConfig config;
  double mutation_rate = -1.0;
};

int cmd_refine(const Options& opts, RefineArgs args) {
  const PassRegistry registry = load_registry_option(opts);
  const auto backend = make_backend(opts, {args.program});
  const PipelineForest seed = parse_pipeline(args.pipeline, registry);
  args.config.seed = opts.seed;
  args.config.parallel = opts.parallel;
  if (args.mutation_rate >= 0.0) args.config.mutation_rate = args.mutation_rate;
  const RefineReport report = refine(seed, args.program, *backend, args.config);
  if (opts.json_output) {
    std::cout << refine_report_json(report) << '\n';
  } else {
    const auto ic = [](const std::optional<std::int64_t>& v) {
      return v ? std::to_string(*v) : std::string("failed");
    };
    std::cout << "seed      " << print_pipeline(report.seed) << "  ic " << ic(report.seed_ic) << '\n'
              << "refined   " << print_pipeline(report.refined) << "  ic " << ic(report.refined_ic)
              << '\n'
              << "decision points " << report.decision_point_count << ", evaluations "
              << report.evaluations_used << (report.exhaustive ? " (exhaustive)" : " (genetic)")
              << '\n';
  }
  return kOk;
}

int cmd_evaluate(const Options& opts, const std::string& program, const std::string& text) {
  const PassRegistry registry = load_registry_option(opts);
  const auto backend = make_backend(opts, {program});
  const PipelineForest forest = parse_pipeline(text, registry);
  const EvaluationResult original = backend->original_count(program);
  const EvaluationResult result = evaluate({program, forest}, *backend, registry);
  if (opts.json_output) {
    json doc = {{"program", program}, {"pipeline", print_pipeline(forest)}, {"ok", result.ok()}};
    doc["original_ic"] = original.ok() ? json(original.instruction_count) : json(nullptr);
    doc["instruction_count"] = result.ok() ? json(result.instruction_count) : json(nullptr);
    if (!result.ok()) doc["detail"] = result.detail;
    std::cout << doc.dump(2) << '\n';
  } else if (result.ok()) {
    std::cout << result.instruction_count << '\n';
  } else {
    std::cerr << "evaluation failed: " << result.detail << '\n';
  }
  return result.ok() ? kOk : kEvaluationFailure;
}

int cmd_report(const Options& opts, const std::string& path) {
  const Report report = aggregate(parse_results_json(read_file(path)));
  std::cout << (opts.json_output ? report_json(report) + "\n" : report_table(report));
  return kOk;
}

int cmd_skeleton(const Options& opts, const std::string& program,
                 const std::vector<std::string>& passes) {
  const PassRegistry registry = load_registry_option(opts);
  const auto backend = make_backend(opts, {program});
  static const char* const kNames[] = {"sequential", "F+L combined", "M+C, F+L combined",
                                       "C+F+L combined", "fully nested"};
  json rows = json::array();
  bool any_failed = false;
  for (int variant = 1; variant <= 5; ++variant) {
    const PipelineForest forest =
        build_skeleton_variant(variant, passes[0], passes[1], passes[2], passes[3], registry);
    const EvaluationResult r = backend->run(program, forest);
    any_failed = any_failed || !r.ok();
    rows.push_back({{"variant", variant},
                    {"name", kNames[variant - 1]},
                    {"pipeline", print_pipeline(forest)},
                    {"instruction_count", r.ok() ? json(r.instruction_count) : json(nullptr)}});
  }
  if (opts.json_output) {
    std::cout << json{{"program", program}, {"variants", rows}}.dump(2) << '\n';
  } else {
    for (const json& row : rows) {
      const json& ic = row["instruction_count"];
      std::cout << row["variant"].get<int>() << "  " << std::left << std::setw(20)
                << row["name"].get<std::string>() << std::setw(8)
                << (ic.is_null() ? std::string("fail") : std::to_string(ic.get<std::int64_t>()))
                << row["pipeline"].get<std::string>() << '\n';
    }
  }
  return any_failed ? kEvaluationFailure : kOk;
}

void emit_experiment(const Options& opts, const std::string& out_dir, const std::string& name,
                     const std::string& table, const std::string& json_text) {
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / (name + ".json")).string(), json_text + "\n");
    write_file((fs::path(out_dir) / (name + ".txt")).string(), table);
  }
  std::cout << (opts.json_output ? json_text + "\n" : table);
}

std::pair<std::string, std::string> split_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "pair '" + text + "' must be written first,second");
  }
  return {text.substr(0, comma), text.substr(comma + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-tuner for LLVM new pass manager pipelines"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--registry", opts.registry_path, "Pass registry file (name=level lines)");
  app.add_option("--evaluator", opts.evaluator, "auto, mock or opt")
      ->check(CLI::IsMember({"auto", "mock", "opt"}));
  app.add_option("--opt", opts.opt_path, "Path to the opt binary")->envname("NPMTUNE_OPT");
  app.add_option("--timeout", opts.timeout_ms, "Per-invocation opt timeout in milliseconds");
  app.add_option("--parallel", opts.parallel, "Concurrent evaluations")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "Random seed");
  app.add_flag("--json", opts.json_output, "Machine-readable output");
  app.fallthrough();

  std::string pipeline_text;
  auto* validate_cmd = app.add_subcommand("validate", "Check a pipeline string");
  validate_cmd->add_option("pipeline", pipeline_text)->required();

  auto* fmt_cmd = app.add_subcommand("fmt", "Print a pipeline in canonical form");
  fmt_cmd->add_option("pipeline", pipeline_text)->required();

  MineArgs mine;
  auto* mine_cmd = app.add_subcommand("mine", "Build a synergy graph from a dataset directory");
  mine_cmd->add_option("dataset", mine.dataset, "Directory of .ll/.bc files or mock programs")->required();
  mine_cmd->add_option("-o,--output", mine.output, "Graph JSON to write");
  mine_cmd->add_option("--checkpoint", mine.checkpoint, "Resumable progress file");
  mine_cmd->add_option("--stop-after", mine.stop_after, "Stop after this many new programs");

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Run the genetic search on one program");
  search_cmd->add_option("program", search.program)->required();
  search_cmd->add_option("--graph", search.graph, "Synergy graph JSON (omit for uniform search)");
  search_cmd->add_option("--population", search.config.population_size);
  search_cmd->add_option("--generations", search.config.generations);
  search_cmd->add_option("--max-length", search.config.max_sequence_length);
  search_cmd->add_option("--crossover", search.config.crossover_rate);
  search_cmd->add_option("--mutation", search.config.mutation_rate);
  search_cmd->add_option("--tournament", search.config.tournament_size);
  search_cmd->add_option("--elitism", search.config.elitism);
  search_cmd->add_option("--log", search.log_path, "Write the per-generation log (JSON lines)");

  RefineArgs refine_args;
  auto* refine_cmd = app.add_subcommand("refine", "Search the join/split structure of a pipeline");
  refine_cmd->add_option("program", refine_args.program)->required();
  refine_cmd->add_option("pipeline", refine_args.pipeline)->required();
  refine_cmd->add_option("--budget", refine_args.config.exhaustive_budget,
                         "Largest space searched exhaustively");
  refine_cmd->add_option("--population", refine_args.config.population_size);
  refine_cmd->add_option("--generations", refine_args.config.generations);
  refine_cmd->add_option("--crossover", refine_args.config.crossover_rate);
  refine_cmd->add_option("--mutation", refine_args.mutation_rate, "Per-bit flip rate (default 1/|D|)");

  std::string program;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Apply a pipeline and report the count");
  evaluate_cmd->add_option("program", program)->required();
  evaluate_cmd->add_option("pipeline", pipeline_text)->required();

  std::string results_path;
  auto* report_cmd = app.add_subcommand("report", "Aggregate OverOz results");
  report_cmd->add_option("results", results_path, "JSON list of {program, group, ic_oz, ic_tuned}")
      ->required();

  std::vector<std::string> skeleton_passes;
  auto* skeleton_cmd =
      app.add_subcommand("skeleton-experiment", "Evaluate the five skeletons of an M,C,F,L sequence");
  skeleton_cmd->add_option("program", program)->required();
  skeleton_cmd->add_option("passes", skeleton_passes, "module cgscc function loop passes")
      ->expected(4)
      ->required();

  auto* experiment_cmd = app.add_subcommand("experiment", "Desk-scale experiments");
  experiment_cmd->require_subcommand(1);
  std::string out_dir;
  experiment_cmd->add_option("--out", out_dir, "Directory for JSON and table output");

  std::vector<std::string> micro_programs;
  std::vector<std::string> micro_pairs;
  auto* micro_cmd = experiment_cmd->add_subcommand("microstructure", "Pair structure agreement study");
  micro_cmd->add_option("programs", micro_programs)->required();
  micro_cmd->add_option("--pair", micro_pairs, "first,second (repeatable)")->required();

  std::string ablation_program;
  std::string ablation_graph;
  SearchConfig ablation_config;
  RefineConfig ablation_refine;
  auto add_ablation = [&](CLI::App* cmd) {
    cmd->add_option("program", ablation_program)->required();
    cmd->add_option("--graph", ablation_graph, "Synergy graph JSON")->required();
    cmd->add_option("--population", ablation_config.population_size);
    cmd->add_option("--generations", ablation_config.generations);
    cmd->add_option("--max-length", ablation_config.max_sequence_length);
  };
  auto* rq3_cmd = experiment_cmd->add_subcommand("rq3", "Guided versus knowledge-blind search");
  add_ablation(rq3_cmd);
  auto* rq4_cmd = experiment_cmd->add_subcommand("rq4", "Search with and without refinement");
  add_ablation(rq4_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }

  try {
    if (*validate_cmd) return cmd_validate(opts, pipeline_text);
    if (*fmt_cmd) return cmd_fmt(opts, pipeline_text);
    if (*mine_cmd) return cmd_mine(opts, mine);
    if (*search_cmd) return cmd_search(opts, search);
    if (*refine_cmd) return cmd_refine(opts, refine_args);
    if (*evaluate_cmd) return cmd_evaluate(opts, program, pipeline_text);
    if (*report_cmd) return cmd_report(opts, results_path);
    if (*skeleton_cmd) return cmd_skeleton(opts, program, skeleton_passes);
    if (*micro_cmd) {
      const PassRegistry registry = load_registry_option(opts);
      const auto backend = make_backend(opts, micro_programs);
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const std::string& p : micro_pairs) pairs.push_back(split_pair(p));
      const MicroStudy study =
          run_microstructure_study(pairs, micro_programs, registry, *backend, opts.parallel);
      emit_experiment(opts, out_dir, "microstructure", microstructure_table(study),
                      microstructure_json(study));
      return kOk;
    }
    if (*rq3_cmd || *rq4_cmd) {
      const PassRegistry registry = load_registry_option(opts);
      const auto backend = make_backend(opts, {ablation_program});
      const SynergyGraph graph = load_graph(ablation_graph);
      ablation_config.seed = opts.seed;
      ablation_config.parallel = opts.parallel;
      if (*rq3_cmd) {
        const Rq3Result r = run_rq3_ablation(ablation_program, graph, registry, *backend, ablation_config);
        emit_experiment(opts, out_dir, "rq3", rq3_table(r), rq3_json(r));
      } else {
        ablation_refine.seed = opts.seed;
        ablation_refine.parallel = opts.parallel;
        const Rq4Result r = run_rq4_ablation(ablation_program, graph, registry, *backend,
                                             ablation_config, ablation_refine);
        emit_experiment(opts, out_dir, "rq4", rq4_table(r), rq4_json(r));
      }
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [IOError]: " << e.what() << '\n';
    return kEnvironment;
  }
  return kInvalidInput;
}
