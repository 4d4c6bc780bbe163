#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace npmtune {

enum class ErrorCode {
  ParseError,
  DuplicatePass,
  UnknownPass,
  SyntaxError,
  TopLevelNotModule,
  LevelMismatch,
  EmptyManager,
  InvalidPipeline,
  BackendUnavailable,
  Timeout,
  MalformedIR,
  ChromosomeLengthMismatch,
  IOError,
  SchemaError,
  InvalidBaseline,
  InvalidConfig,
  EvaluationFailed,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace npmtune
