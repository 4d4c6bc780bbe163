#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace npmtune {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool spawn_failed = false;
  std::string out;
  std::string err;
};

/// Runs argv[0] (looked up on PATH) with stdout/stderr captured. The child is
/// killed once `timeout` elapses.
ProcessResult run_process(const std::vector<std::string>& argv,
                          std::chrono::milliseconds timeout);

/// Resolves a program name against PATH; returns empty when not executable.
std::string find_executable(const std::string& name);

}  // namespace npmtune
