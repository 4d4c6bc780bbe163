#include <gtest/gtest.h>

#include <chrono>

#include "npmtune/error.hpp"
#include "npmtune/evaluation.hpp"
#include "npmtune/subprocess.hpp"

using namespace npmtune;
using namespace std::chrono_literals;

namespace {

const std::string kData = NPMTUNE_TEST_DATA;
const std::string kSample = kData + "/sample.ll";

OptConfig fake_opt(std::chrono::milliseconds timeout = 10'000ms) {
  OptConfig c;
  c.opt_path = kData + "/fake-opt.sh";
  c.timeout = timeout;
  return c;
}

PipelineForest parse(const char* text) { return parse_pipeline(text, default_registry()); }

}  // namespace

TEST(Process, CapturesOutputAndStatus) {
  const ProcessResult r = run_process({"sh", "-c", "echo out; echo err >&2; exit 3"}, 5000ms);
  EXPECT_FALSE(r.spawn_failed);
  EXPECT_FALSE(r.timed_out);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.out, "out\n");
  EXPECT_EQ(r.err, "err\n");
}

TEST(Process, Timeout) {
  const auto start = std::chrono::steady_clock::now();
  const ProcessResult r = run_process({"sleep", "10"}, 200ms);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(Process, MissingProgram) {
  EXPECT_TRUE(run_process({"/nonexistent/program"}, 1000ms).spawn_failed);
  EXPECT_TRUE(find_executable("definitely-not-a-real-binary-xyz").empty());
  EXPECT_FALSE(find_executable("sh").empty());
}

TEST(OptBackend, CountsAfterPipeline) {
  const OptBackend backend(fake_opt());
  EXPECT_EQ(backend.original_count(kSample).instruction_count, 10);
  const EvaluationResult r = backend.run(kSample, parse("module(function(adce))"));
  ASSERT_TRUE(r.ok()) << r.detail;
  EXPECT_EQ(r.instruction_count, 9);
  const EvaluationResult both =
      backend.run(kSample, parse("module(function(adce,loop(loop-deletion)))"));
  ASSERT_TRUE(both.ok()) << both.detail;
  EXPECT_EQ(both.instruction_count, 6);
}

TEST(OptBackend, FailuresAreResults) {
  const OptBackend backend(fake_opt(300ms));
  const EvaluationResult crash = backend.run(kSample, parse("module(function(tsan))"));
  EXPECT_FALSE(crash.ok());
  EXPECT_NE(crash.detail.find("pass failed"), std::string::npos);
  const EvaluationResult slow = backend.run(kSample, parse("module(function(bounds-checking))"));
  EXPECT_FALSE(slow.ok());
  EXPECT_NE(slow.detail.find("Timeout"), std::string::npos);
  const EvaluationResult missing = backend.run(kData + "/absent.ll", parse("module(function(adce))"));
  EXPECT_FALSE(missing.ok());
}

TEST(OptBackend, MissingBinary) {
  OptConfig c;
  c.opt_path = "/nonexistent/opt";
  try {
    OptBackend backend(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
  EXPECT_THROW(opt_backend_evaluate(kSample, "module(function(adce))", c), Error);
}

TEST(OptConfig, FlagBeatsEnvironment) {
  ::setenv("NPMTUNE_OPT", "/from/env/opt", 1);
  EXPECT_EQ(OptConfig::from_environment().opt_path, "/from/env/opt");
  EXPECT_EQ(OptConfig::from_environment(std::string("/flag/opt")).opt_path, "/flag/opt");
  ::unsetenv("NPMTUNE_OPT");
  EXPECT_EQ(OptConfig::from_environment().opt_path, "opt");
}
