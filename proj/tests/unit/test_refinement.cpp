#include <gtest/gtest.h>

#include <algorithm>

#include "generators.hpp"
#include "npmtune/error.hpp"
#include "npmtune/refinement.hpp"
#include "reference_mock.hpp"

using namespace npmtune;

namespace {

const std::string kData = NPMTUNE_TEST_DATA;

PassRegistry mock_registry() { return load_registry_file(kData + "/mock.registry"); }

std::vector<TypedPass> seq(const char* text) {
  return leaf_sequence(parse_pipeline(text, default_registry()));
}

std::string opener(char level) {
  switch (level) {
    case 'C': return "cgscc(";
    case 'F': return "function(";
    case 'L': return "function(loop(";
  }
  return "";
}

std::string closer(char level) { return level == 'L' ? "))" : level == 'M' ? "" : ")"; }

// Builds the partitioned pipeline text without the library's decoder.
std::string oracle_decode(const std::vector<TypedPass>& s, const std::vector<bool>& cut_after) {
  std::vector<std::vector<std::size_t>> blocks{{0}};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i].level != s[i + 1].level || cut_after[i]) blocks.emplace_back();
    blocks.back().push_back(i + 1);
  }
  std::string out = "module(";
  bool first_in_tree = true;
  char prev = 0;
  for (const auto& block : blocks) {
    const char level = gen::level_letter(s[block.front()].level);
    if (level == 'M' && prev == 'M') {
      out += "),module(";
      first_in_tree = true;
    }
    if (!first_in_tree) out += ",";
    out += opener(level);
    for (std::size_t k = 0; k < block.size(); ++k) {
      if (k) out += ",";
      out += s[block[k]].name;
    }
    out += closer(level);
    first_in_tree = false;
    prev = level;
  }
  return out + ")";
}

std::vector<bool> expand(const PartitionProblem& p, std::uint64_t mask) {
  std::vector<bool> cuts(p.sequence.size(), false);
  for (std::size_t i = 0; i < p.decision_points.size(); ++i) {
    cuts[p.decision_points[i]] = (mask >> i) & 1u;
  }
  return cuts;
}

PartitionChromosome bits_of(std::size_t n, std::uint64_t mask) {
  PartitionChromosome bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (mask >> i) & 1u;
  return bits;
}

}  // namespace

TEST(DecisionPoints, SameLevelBoundariesOnly) {
  const PartitionProblem p =
      decision_points(seq("module(globalopt,function(gvn,adce,loop(licm,loop-deletion)))"));
  const std::vector<std::size_t> want{1, 3};
  EXPECT_EQ(p.decision_points, want);
  EXPECT_EQ(p.space_size(), 4u);
  EXPECT_TRUE(decision_points(seq("module(globalopt,function(gvn))")).decision_points.empty());
  EXPECT_EQ(decision_points(seq("module(globalopt)")).space_size(), 1u);
}

TEST(Decode, Examples) {
  const PartitionProblem p = decision_points(seq("module(globalopt,function(gvn,adce,loop(licm)))"));
  EXPECT_EQ(print_pipeline(decode(p, {false})),
            "module(globalopt,function(gvn,adce),function(loop(licm)))");
  EXPECT_EQ(print_pipeline(decode(p, {true})),
            "module(globalopt,function(gvn),function(adce),function(loop(licm)))");
  const PartitionProblem m = decision_points(seq("module(globalopt,strip)"));
  EXPECT_EQ(print_pipeline(decode(m, {false})), "module(globalopt,strip)");
  EXPECT_EQ(print_pipeline(decode(m, {true})), "module(globalopt),module(strip)");
  try {
    decode(p, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChromosomeLengthMismatch);
  }
}

TEST(Decode, MatchesOracleAndPreservesSequence) {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const PipelineForest f = gen::random_forest(default_registry(), rng, {3, 5, 4, 0.0});
    const PartitionProblem p = decision_points(leaf_sequence(f));
    const std::size_t n = p.decision_points.size();
    const auto mask = n ? rng.next() & ((n >= 64 ? ~0ull : (1ull << n) - 1)) : 0;
    const PipelineForest d = decode(p, bits_of(n, mask));
    EXPECT_TRUE(validate(d, default_registry()).ok());
    EXPECT_EQ(leaf_sequence(d), p.sequence);
    EXPECT_EQ(print_pipeline(d), oracle_decode(p.sequence, expand(p, mask)));
  }
}

TEST(Encode, SharedParentMeansJoined) {
  const auto [p, bits] = encode(parse_pipeline("module(function(gvn),function(adce,instcombine))",
                                               default_registry()));
  const PartitionChromosome want{true, false};
  EXPECT_EQ(bits, want);
  EXPECT_EQ(print_pipeline(decode(p, bits)), "module(function(gvn),function(adce,instcombine))");
}

TEST(Encode, DecodeRoundTrip) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    const PipelineForest f = gen::random_forest(default_registry(), rng, {3, 5, 4, 0.0});
    const auto [p, bits] = encode(f);
    EXPECT_EQ(encode(decode(p, bits)).second, bits);
  }
}

TEST(Refine, M2SplitsFunctionBlock) {
  MockBackend backend;
  backend.add("m2", load_mock_program(kData + "/m2/M2.json"));
  const RefineReport r =
      refine(parse_pipeline("module(function(a,b))", mock_registry()), "m2", backend);
  EXPECT_EQ(r.seed_ic, 80);
  EXPECT_EQ(r.refined_ic, 73);
  EXPECT_EQ(print_pipeline(r.refined), "module(function(a),function(b))");
  EXPECT_EQ(r.decision_point_count, 1u);
  EXPECT_TRUE(r.exhaustive);
}

TEST(Refine, NoDecisionPointsReturnsSeed) {
  MockBackend backend;
  backend.add("m1", load_mock_program(kData + "/m1/M1.json"));
  const PipelineForest seed = parse_pipeline("module(m,function(a))", mock_registry());
  const RefineReport r = refine(seed, "m1", backend);
  EXPECT_EQ(r.refined, seed);
  EXPECT_EQ(r.decision_point_count, 0u);
  EXPECT_EQ(r.evaluations_used, 1u);
  EXPECT_EQ(r.seed_ic, r.refined_ic);
}

TEST(Refine, NeverRegresses) {
  MockBackend backend;
  backend.add("m1", load_mock_program(kData + "/m1/M1.json"));
  const PipelineForest seed = parse_pipeline("module(function(a,b))", mock_registry());
  const RefineReport r = refine(seed, "m1", backend);
  EXPECT_EQ(r.seed_ic, 82);
  EXPECT_EQ(r.refined_ic, 82);
  EXPECT_EQ(r.refined, seed);
}

TEST(Refine, ExhaustiveMatchesBruteForce) {
  Rng rng(33);
  for (int round = 0; round < 15; ++round) {
    const PassRegistry r = gen::random_registry(4, rng, "MF");
    const MockProgram mock = gen::random_mock(r, rng, {4, 0.6, 0.3, 0.6, 10});
    MockBackend backend;
    backend.add("p", mock);
    std::vector<TypedPass> s;
    const std::size_t len = 2 + rng.index(7);
    for (std::size_t i = 0; i < len; ++i) {
      const PassInfo& info = r.entries()[rng.index(r.size())];
      s.push_back({info.name, info.level});
    }
    const PartitionProblem p = decision_points(s);
    const std::size_t n = p.decision_points.size();
    const PipelineForest seed = decode(p, PartitionChromosome(n, false));
    const RefineReport rep = refine(seed, "p", backend);

    const reference::Program ref = reference::from_mock(mock);
    std::int64_t best = reference::instruction_count(oracle_decode(s, expand(p, 0)), ref);
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
      best = std::min(best, reference::instruction_count(oracle_decode(s, expand(p, mask)), ref));
    }
    ASSERT_TRUE(rep.refined_ic.has_value());
    EXPECT_EQ(*rep.refined_ic, best);
    EXPECT_EQ(rep.evaluations_used, 1ull << n);
    EXPECT_TRUE(rep.exhaustive);
  }
}

TEST(Refine, GeneticPathBeyondBudget) {
  MockProgram mock = load_mock_program(kData + "/m2/M2.json");
  for (auto& f : mock.functions) f.base_ic = 1000;
  MockBackend backend;
  backend.add("m2", mock);
  std::vector<TypedPass> s;
  for (int i = 0; i < 16; ++i) s.push_back({i % 2 ? "b" : "a", PassLevel::Function});
  const PartitionProblem p = decision_points(s);
  const PipelineForest seed = decode(p, PartitionChromosome(p.decision_points.size(), false));
  RefineConfig c;
  c.seed = 3;
  const RefineReport r = refine(seed, "m2", backend, c);
  EXPECT_FALSE(r.exhaustive);
  EXPECT_EQ(r.decision_point_count, 15u);
  EXPECT_LE(r.evaluations_used, 1 + c.population_size * (c.generations + 1));
  ASSERT_TRUE(r.seed_ic && r.refined_ic);
  EXPECT_LT(*r.refined_ic, *r.seed_ic);
  EXPECT_EQ(leaf_sequence(r.refined), s);
  EXPECT_EQ(refine(seed, "m2", backend, c).refined, r.refined);
}

TEST(Refine, ReportJson) {
  MockBackend backend;
  backend.add("m2", load_mock_program(kData + "/m2/M2.json"));
  const RefineReport r =
      refine(parse_pipeline("module(function(a,b))", mock_registry()), "m2", backend);
  const std::string json = refine_report_json(r);
  EXPECT_NE(json.find("\"refined_pipeline\""), std::string::npos);
  EXPECT_NE(json.find("\"seed_ic\": 80"), std::string::npos);
  EXPECT_NE(json.find("\"decision_point_count\": 1"), std::string::npos);
}
