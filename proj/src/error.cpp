#include "npmtune/error.hpp"

namespace npmtune {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePass: return "DuplicatePass";
    case ErrorCode::UnknownPass: return "UnknownPass";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::TopLevelNotModule: return "TopLevelNotModule";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::EmptyManager: return "EmptyManager";
    case ErrorCode::InvalidPipeline: return "InvalidPipeline";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedIR: return "MalformedIR";
    case ErrorCode::ChromosomeLengthMismatch: return "ChromosomeLengthMismatch";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidBaseline: return "InvalidBaseline";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EvaluationFailed: return "EvaluationFailed";
  }
  return "Unknown";
}

}  // namespace npmtune
