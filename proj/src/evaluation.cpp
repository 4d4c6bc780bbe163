#include "npmtune/evaluation.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <unistd.h>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/subprocess.hpp"

namespace npmtune {

using nlohmann::json;

EvaluationResult evaluate(const EvaluationRequest& request, const EvaluationBackend& backend,
                          const PassRegistry& registry) {
  const ValidationReport report = validate(request.pipeline, registry);
  if (!report.ok()) {
    throw Error(ErrorCode::InvalidPipeline, "pipeline rejected:\n" + report.to_string());
  }
  return backend.run(request.program, request.pipeline);
}

// ---------------------------------------------------------------------------
// count_ir_instructions

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_label(std::string_view line) {
  const auto space = line.find_first_of(" \t");
  const std::string_view head = line.substr(0, space);
  if (head.size() < 2 || head.back() != ':') return false;
  if (space == std::string_view::npos) return true;
  const std::string_view rest = trim(line.substr(space));
  return rest.empty() || rest.front() == ';';
}

}  // namespace

std::int64_t count_ir_instructions(std::string_view ir_text) {
  std::int64_t count = 0;
  bool in_body = false;
  while (!ir_text.empty()) {
    const auto eol = ir_text.find('\n');
    const std::string_view line = trim(ir_text.substr(0, eol));
    ir_text = eol == std::string_view::npos ? std::string_view{} : ir_text.substr(eol + 1);

    if (!in_body) {
      if (line.starts_with("define ") && line.ends_with("{")) in_body = true;
      continue;
    }
    if (line == "}") {
      in_body = false;
      continue;
    }
    if (line.empty() || line.front() == ';' || is_label(line)) continue;
    ++count;
  }
  if (in_body) throw Error(ErrorCode::MalformedIR, "function body is not closed");
  return count;
}

// ---------------------------------------------------------------------------
// opt backend

OptConfig OptConfig::from_environment(const std::optional<std::string>& flag) {
  OptConfig config;
  if (flag && !flag->empty()) {
    config.opt_path = *flag;
  } else if (const char* env = std::getenv("NPMTUNE_OPT"); env != nullptr && *env != '\0') {
    config.opt_path = env;
  }
  return config;
}

namespace {

std::string resolve_opt(const OptConfig& config) {
  std::string path = find_executable(config.opt_path);
  if (path.empty()) {
    throw Error(ErrorCode::BackendUnavailable,
                "opt executable '" + config.opt_path + "' not found");
  }
  return path;
}

std::string first_lines(const std::string& text, std::size_t max_lines = 5) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < max_lines && pos != std::string::npos; ++i) {
    pos = text.find('\n', pos == 0 ? 0 : pos + 1);
  }
  return pos == std::string::npos ? text : text.substr(0, pos);
}

EvaluationResult run_opt(const std::string& opt, const std::string& ir_file,
                         const std::string& pipeline_string, const OptConfig& config) {
  if (::access(ir_file.c_str(), R_OK) != 0) {
    return EvaluationResult::failure("input '" + ir_file + "' is not readable");
  }
  const ProcessResult proc = run_process(
      {opt, "-S", "-passes=" + pipeline_string, ir_file, "-o", "-"}, config.timeout);
  if (proc.spawn_failed) {
    throw Error(ErrorCode::BackendUnavailable, proc.err);
  }
  if (proc.timed_out) {
    return EvaluationResult::failure("Timeout: opt exceeded " +
                                     std::to_string(config.timeout.count()) + " ms");
  }
  if (proc.exit_code != 0) {
    return EvaluationResult::failure("opt exited with status " + std::to_string(proc.exit_code) +
                                     ": " + first_lines(proc.err));
  }
  try {
    return EvaluationResult::success(count_ir_instructions(proc.out));
  } catch (const Error& e) {
    return EvaluationResult::failure(e.what());
  }
}

}  // namespace

EvaluationResult opt_backend_evaluate(const std::string& ir_file,
                                      const std::string& pipeline_string,
                                      const OptConfig& config) {
  return run_opt(resolve_opt(config), ir_file, pipeline_string, config);
}

OptBackend::OptBackend(OptConfig config) : config_(std::move(config)) {
  config_.opt_path = resolve_opt(config_);
}

EvaluationResult OptBackend::original_count(const ProgramRef& program) const {
  if (program.ends_with(".ll")) {
    std::ifstream in(program);
    if (!in) return EvaluationResult::failure("input '" + program + "' is not readable");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      return EvaluationResult::success(count_ir_instructions(buf.str()));
    } catch (const Error& e) {
      return EvaluationResult::failure(e.what());
    }
  }
  return run_opt(config_.opt_path, program, "verify", config_);
}

EvaluationResult OptBackend::run(const ProgramRef& program, const PipelineForest& pipeline) const {
  return run_opt(config_.opt_path, program, print_pipeline(pipeline), config_);
}

// ---------------------------------------------------------------------------
// MockProgram

void MockProgram::check() const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const MockFunction& fn = functions[i];
    if (fn.base_ic < 0) throw Error(ErrorCode::SchemaError, "negative base_ic for " + fn.name);
    if (!index.emplace(fn.name, i).second) {
      throw Error(ErrorCode::SchemaError, "duplicate function '" + fn.name + "'");
    }
  }
  std::vector<std::vector<std::size_t>> callees(functions.size());
  for (const auto& [caller, callee] : calls) {
    auto a = index.find(caller);
    auto b = index.find(callee);
    if (a == index.end() || b == index.end()) {
      throw Error(ErrorCode::SchemaError, "call edge " + caller + "->" + callee +
                                              " names an unknown function");
    }
    callees[a->second].push_back(b->second);
  }
  for (const auto& [pass, effect] : effects) {
    if (effect < 0) throw Error(ErrorCode::SchemaError, "negative effect for " + pass);
  }
  for (const auto* list : {&pair_synergy, &coupling}) {
    for (const PassPairBonus& b : *list) {
      if (b.bonus < 0) {
        throw Error(ErrorCode::SchemaError, "negative bonus for " + b.first + "," + b.second);
      }
    }
  }

  // Call edges must form a DAG.
  enum class Mark : std::uint8_t { None, Active, Done };
  std::vector<Mark> marks(functions.size(), Mark::None);
  auto visit = [&](auto&& self, std::size_t node) -> void {
    marks[node] = Mark::Active;
    for (std::size_t next : callees[node]) {
      if (marks[next] == Mark::Active) {
        throw Error(ErrorCode::SchemaError, "call graph has a cycle through '" +
                                                functions[next].name + "'");
      }
      if (marks[next] == Mark::None) self(self, next);
    }
    marks[node] = Mark::Done;
  };
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (marks[i] == Mark::None) visit(visit, i);
  }
}

std::int64_t MockProgram::original_count() const {
  std::int64_t total = 0;
  for (const MockFunction& fn : functions) total += fn.base_ic;
  return total;
}

namespace {

std::vector<PassPairBonus> bonuses_from_json(const json& list) {
  std::vector<PassPairBonus> out;
  for (const json& item : list) {
    out.push_back({item.at("p").get<std::string>(), item.at("q").get<std::string>(),
                   item.at("bonus").get<std::int64_t>()});
  }
  return out;
}

json bonuses_to_json(const std::vector<PassPairBonus>& list) {
  json out = json::array();
  for (const PassPairBonus& b : list) {
    out.push_back({{"p", b.first}, {"q", b.second}, {"bonus", b.bonus}});
  }
  return out;
}

}  // namespace

MockProgram parse_mock_program(std::string_view json_text) {
  MockProgram program;
  try {
    const json doc = json::parse(json_text);
    for (const json& fn : doc.at("functions")) {
      program.functions.push_back(
          {fn.at("name").get<std::string>(), fn.at("base_ic").get<std::int64_t>()});
    }
    if (doc.contains("calls")) {
      for (const json& edge : doc.at("calls")) {
        program.calls.emplace_back(edge.at(0).get<std::string>(), edge.at(1).get<std::string>());
      }
    }
    if (doc.contains("effects")) {
      for (const auto& [pass, value] : doc.at("effects").items()) {
        program.effects[pass] = value.get<std::int64_t>();
      }
    }
    if (doc.contains("pair_synergy")) program.pair_synergy = bonuses_from_json(doc["pair_synergy"]);
    if (doc.contains("coupling")) program.coupling = bonuses_from_json(doc["coupling"]);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("mock program: ") + e.what());
  }
  program.check();
  return program;
}

MockProgram load_mock_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot read mock program '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mock_program(buf.str());
}

std::string mock_program_to_json(const MockProgram& program) {
  json doc;
  doc["functions"] = json::array();
  for (const MockFunction& fn : program.functions) {
    doc["functions"].push_back({{"name", fn.name}, {"base_ic", fn.base_ic}});
  }
  doc["calls"] = json::array();
  for (const auto& [caller, callee] : program.calls) doc["calls"].push_back({caller, callee});
  doc["effects"] = json::object();
  for (const auto& [pass, value] : program.effects) doc["effects"][pass] = value;
  doc["pair_synergy"] = bonuses_to_json(program.pair_synergy);
  doc["coupling"] = bonuses_to_json(program.coupling);
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Execution schedule

namespace {

class Scheduler {
 public:
  explicit Scheduler(const MockProgram& program) : program_(program) {}

  ExecutionSchedule run(const PipelineForest& forest) {
    for (const PipelineNode& tree : forest.trees) module_wide(tree);
    return std::move(schedule_);
  }

 private:
  // Module and (flattened) cgscc managers.
  void module_wide(const PipelineNode& manager) {
    for (const PipelineNode& child : manager.children) {
      if (child.is_leaf()) {
        for (const MockFunction& fn : program_.functions) emit(child.pass, fn.name);
      } else if (child.level == PassLevel::Module || child.level == PassLevel::CGSCC) {
        module_wide(child);
      } else {
        for (const MockFunction& fn : program_.functions) function_block(child, fn.name);
      }
    }
  }

  // Function and loop managers, for one function at a time.
  void function_block(const PipelineNode& manager, const std::string& function) {
    for (const PipelineNode& child : manager.children) {
      if (child.is_leaf()) {
        emit(child.pass, function);
      } else {
        function_block(child, function);
      }
    }
  }

  void emit(const std::string& pass, const std::string& function) {
    schedule_.push_back({pass, function});
  }

  const MockProgram& program_;
  ExecutionSchedule schedule_;
};

}  // namespace

ExecutionSchedule schedule_of(const PipelineForest& forest, const MockProgram& program) {
  return Scheduler(program).run(forest);
}

std::int64_t mock_instruction_count(const MockProgram& program,
                                    const ExecutionSchedule& schedule) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < program.functions.size(); ++i) {
    index.emplace(program.functions[i].name, i);
  }
  std::vector<std::vector<std::size_t>> callees(program.functions.size());
  for (const auto& [caller, callee] : program.calls) {
    callees[index.at(caller)].push_back(index.at(callee));
  }
  std::unordered_map<std::string, std::vector<const PassPairBonus*>> synergy_by_second;
  for (const PassPairBonus& b : program.pair_synergy) synergy_by_second[b.second].push_back(&b);
  std::unordered_map<std::string, std::vector<const PassPairBonus*>> coupling_by_second;
  for (const PassPairBonus& b : program.coupling) coupling_by_second[b.second].push_back(&b);

  std::vector<std::int64_t> reduction(program.functions.size(), 0);
  std::vector<std::unordered_set<std::string>> applied(program.functions.size());

  for (const ScheduleEvent& event : schedule) {
    const std::size_t f = index.at(event.function);
    if (auto it = program.effects.find(event.pass); it != program.effects.end()) {
      reduction[f] += it->second;
    }
    if (auto it = synergy_by_second.find(event.pass); it != synergy_by_second.end()) {
      for (const PassPairBonus* b : it->second) {
        if (applied[f].contains(b->first)) reduction[f] += b->bonus;
      }
    }
    if (auto it = coupling_by_second.find(event.pass);
        it != coupling_by_second.end() && !callees[f].empty()) {
      for (const PassPairBonus* b : it->second) {
        bool all_callees = true;
        for (std::size_t callee : callees[f]) {
          all_callees = all_callees && applied[callee].contains(b->first);
        }
        if (all_callees) reduction[f] += b->bonus;
      }
    }
    applied[f].insert(event.pass);
  }

  std::int64_t total = 0;
  for (std::size_t i = 0; i < program.functions.size(); ++i) {
    total += std::max<std::int64_t>(0, program.functions[i].base_ic - reduction[i]);
  }
  return total;
}

EvaluationResult mock_backend_evaluate(const MockProgram& program,
                                       const PipelineForest& forest) {
  return EvaluationResult::success(mock_instruction_count(program, schedule_of(forest, program)));
}

void MockBackend::add(ProgramRef id, MockProgram program) {
  program.check();
  programs_.insert_or_assign(std::move(id), std::move(program));
}

const MockProgram& MockBackend::program(const ProgramRef& id) const {
  auto it = programs_.find(id);
  if (it == programs_.end()) {
    throw Error(ErrorCode::BackendUnavailable, "mock program '" + id + "' is not loaded");
  }
  return it->second;
}

std::vector<ProgramRef> MockBackend::programs() const {
  std::vector<ProgramRef> ids;
  for (const auto& [id, program] : programs_) ids.push_back(id);
  return ids;
}

EvaluationResult MockBackend::original_count(const ProgramRef& id) const {
  return EvaluationResult::success(program(id).original_count());
}

EvaluationResult MockBackend::run(const ProgramRef& id, const PipelineForest& pipeline) const {
  return mock_backend_evaluate(program(id), pipeline);
}

}  // namespace npmtune
