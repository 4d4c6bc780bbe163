#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "npmtune/pipeline.hpp"

namespace npmtune {

/// A file path for the opt backend, a registered program id for the mock.
using ProgramRef = std::string;

struct EvaluationResult {
  enum class Status : std::uint8_t { Ok, Failed };

  Status status = Status::Failed;
  std::int64_t instruction_count = 0;  // meaningful only when ok()
  std::string detail;

  [[nodiscard]] bool ok() const { return status == Status::Ok; }

  static EvaluationResult success(std::int64_t count) { return {Status::Ok, count, {}}; }
  static EvaluationResult failure(std::string detail) {
    return {Status::Failed, 0, std::move(detail)};
  }
};

/// Apply a pipeline to a program and report the resulting instruction count.
/// Implementations must be safe to call concurrently.
class EvaluationBackend {
 public:
  virtual ~EvaluationBackend() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  /// Instruction count of the program before any pass runs.
  [[nodiscard]] virtual EvaluationResult original_count(const ProgramRef& program) const = 0;
  /// `pipeline` has already been validated.
  [[nodiscard]] virtual EvaluationResult run(const ProgramRef& program,
                                             const PipelineForest& pipeline) const = 0;
};

struct EvaluationRequest {
  ProgramRef program;
  PipelineForest pipeline;
};

/// Validates the pipeline, then hands it to the backend.
/// Throws InvalidPipeline without touching the backend when validation fails.
EvaluationResult evaluate(const EvaluationRequest& request, const EvaluationBackend& backend,
                          const PassRegistry& registry);

// ---------------------------------------------------------------------------
// Textual IR

/// Counts instruction lines inside `define ... { ... }` bodies: lines that are
/// not blank, not `;` comments and not labels. Throws MalformedIR when a body
/// is never closed.
std::int64_t count_ir_instructions(std::string_view ir_text);

// ---------------------------------------------------------------------------
// opt subprocess backend

struct OptConfig {
  std::string opt_path = "opt";
  std::chrono::milliseconds timeout{60'000};

  /// Explicit flag, then $NPMTUNE_OPT, then `opt` on PATH.
  static OptConfig from_environment(const std::optional<std::string>& flag = std::nullopt);
};

/// Runs `opt -S -passes=<pipeline> <ir_file> -o -` and counts the output.
/// A failing or timed-out opt run is reported as a failed result;
/// an opt binary that cannot be found throws BackendUnavailable.
EvaluationResult opt_backend_evaluate(const std::string& ir_file,
                                      const std::string& pipeline_string,
                                      const OptConfig& config);

class OptBackend final : public EvaluationBackend {
 public:
  explicit OptBackend(OptConfig config);

  [[nodiscard]] std::string name() const override { return "opt"; }
  [[nodiscard]] EvaluationResult original_count(const ProgramRef& program) const override;
  [[nodiscard]] EvaluationResult run(const ProgramRef& program,
                                     const PipelineForest& pipeline) const override;

  [[nodiscard]] const OptConfig& config() const { return config_; }

 private:
  OptConfig config_;
};

// ---------------------------------------------------------------------------
// Synthetic programs

struct MockFunction {
  std::string name;
  std::int64_t base_ic = 0;

  friend bool operator==(const MockFunction&, const MockFunction&) = default;
};

/// Bonus reduction awarded when `second` runs after `first` (see MockProgram).
struct PassPairBonus {
  std::string first;
  std::string second;
  std::int64_t bonus = 0;

  friend bool operator==(const PassPairBonus&, const PassPairBonus&) = default;
};

/// A synthetic module whose instruction count responds to pass order and to
/// the per-function interleaving the pipeline structure implies.
///
/// Every event (q, f) reduces f by effects[q]; by b for each pair_synergy
/// (p, q, b) where p already ran on f; and by b for each coupling (p, q, b)
/// where f has callees and p already ran on every one of them. Counts are
/// clamped at zero per function.
struct MockProgram {
  std::vector<MockFunction> functions;
  std::vector<std::pair<std::string, std::string>> calls;  // caller -> callee
  std::map<std::string, std::int64_t> effects;
  std::vector<PassPairBonus> pair_synergy;
  std::vector<PassPairBonus> coupling;

  /// Throws SchemaError on unknown functions, negative values or call cycles.
  void check() const;
  [[nodiscard]] std::int64_t original_count() const;

  friend bool operator==(const MockProgram&, const MockProgram&) = default;
};

/// JSON keys: functions [{name, base_ic}], calls [[caller, callee]],
/// effects {pass: int}, pair_synergy / coupling [{p, q, bonus}].
MockProgram parse_mock_program(std::string_view json_text);
MockProgram load_mock_program(const std::string& path);
std::string mock_program_to_json(const MockProgram& program);

struct ScheduleEvent {
  std::string pass;
  std::string function;

  friend bool operator==(const ScheduleEvent&, const ScheduleEvent&) = default;
};

using ExecutionSchedule = std::vector<ScheduleEvent>;

/// Order in which passes touch functions. Trees and manager children run in
/// order; a function manager runs its whole block on one function before the
/// next; module and cgscc leaves apply to every function at once (cgscc is
/// flattened to module-wide application); loop managers run inside the
/// enclosing function's turn.
ExecutionSchedule schedule_of(const PipelineForest& forest, const MockProgram& program);

std::int64_t mock_instruction_count(const MockProgram& program,
                                    const ExecutionSchedule& schedule);

EvaluationResult mock_backend_evaluate(const MockProgram& program,
                                       const PipelineForest& forest);

class MockBackend final : public EvaluationBackend {
 public:
  MockBackend() = default;

  void add(ProgramRef id, MockProgram program);
  [[nodiscard]] const MockProgram& program(const ProgramRef& id) const;
  [[nodiscard]] std::vector<ProgramRef> programs() const;

  [[nodiscard]] std::string name() const override { return "mock"; }
  [[nodiscard]] EvaluationResult original_count(const ProgramRef& program) const override;
  [[nodiscard]] EvaluationResult run(const ProgramRef& program,
                                     const PipelineForest& pipeline) const override;

 private:
  std::map<ProgramRef, MockProgram> programs_;
};

}  // namespace npmtune
