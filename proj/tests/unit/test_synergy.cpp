#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "generators.hpp"
#include "npmtune/error.hpp"
#include "npmtune/synergy.hpp"
#include "reference_mock.hpp"

using namespace npmtune;

namespace {

const std::string kData = NPMTUNE_TEST_DATA;

PassRegistry mock_registry() { return load_registry_file(kData + "/mock.registry"); }

using EdgeCounts = std::map<std::pair<std::string, std::string>, double>;

// Brute-force mining over the reference semantics.
EdgeCounts oracle_counts(const std::vector<MockProgram>& programs, const PassRegistry& registry) {
  EdgeCounts counts;
  for (const MockProgram& mock : programs) {
    const reference::Program p = reference::from_mock(mock);
    const std::int64_t orig = reference::original_count(p);
    std::map<std::string, std::int64_t> single;
    for (const auto& info : registry.entries()) {
      single[info.name] =
          orig - reference::instruction_count(reference::wrap(info.name, gen::level_letter(info.level)), p);
    }
    for (const auto& a : registry.entries()) {
      for (const auto& b : registry.entries()) {
        const std::string skel = reference::pair_skeleton(a.name, gen::level_letter(a.level), b.name,
                                                          gen::level_letter(b.level));
        const std::int64_t combined = orig - reference::instruction_count(skel, p);
        if (combined > single[a.name] + single[b.name]) counts[{a.name, b.name}] += 1;
      }
    }
  }
  return counts;
}

struct OracleGraph {
  std::map<std::pair<std::string, std::string>, double> weights;
  std::map<std::string, double> starts;
};

OracleGraph oracle_graph(const EdgeCounts& counts) {
  OracleGraph g;
  std::map<std::string, double> out;
  double total = 0;
  for (const auto& [edge, n] : counts) {
    out[edge.first] += n;
    total += n;
  }
  for (const auto& [edge, n] : counts) g.weights[edge] = n / out[edge.first];
  for (const auto& [from, n] : out) g.starts[from] = n / total;
  return g;
}

MockBackend backend_for(const std::vector<MockProgram>& programs, std::vector<ProgramRef>& ids) {
  MockBackend backend;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    ids.push_back("prog" + std::to_string(i));
    backend.add(ids.back(), programs[i]);
  }
  return backend;
}

}  // namespace

TEST(Synergy, M1HasSingleEdge) {
  MockBackend backend;
  backend.add("m1", load_mock_program(kData + "/m1/M1.json"));
  const SynergyGraph g = mine_synergies({"m1"}, mock_registry(), backend);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].from, "a");
  EXPECT_EQ(g.edges[0].to, "b");
  EXPECT_EQ(g.edges[0].type, SynergyType::IntraLevel);
  EXPECT_DOUBLE_EQ(g.edges[0].weight, 1.0);
  EXPECT_EQ(g.start_weights.size(), 1u);
  EXPECT_DOUBLE_EQ(g.start_weights.at("a"), 1.0);
  const std::vector<std::string> nodes{"a", "b"};
  EXPECT_EQ(g.nodes, nodes);
  g.check();
}

TEST(Synergy, ZeroEffectProgramGivesEmptyGraph) {
  MockProgram p;
  p.functions.push_back({"f", 40});
  MockBackend backend;
  backend.add("z", p);
  MiningStats stats;
  const SynergyGraph g = mine_synergies({"z"}, mock_registry(), backend, {}, &stats);
  EXPECT_TRUE(g.empty());
  EXPECT_TRUE(g.start_weights.empty());
  EXPECT_TRUE(stats.complete);
  EXPECT_EQ(stats.evaluations, 1u + 5u + 25u);
}

TEST(Synergy, EmptyDatasetRejected) {
  MockBackend backend;
  try {
    mine_synergies({}, mock_registry(), backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Synergy, AgreesWithOracle) {
  Rng rng(21);
  for (int round = 0; round < 10; ++round) {
    const PassRegistry r = gen::random_registry(1 + rng.index(6), rng);
    std::vector<MockProgram> programs;
    for (int i = 0; i < 3; ++i) programs.push_back(gen::random_mock(r, rng));
    std::vector<ProgramRef> ids;
    const MockBackend backend = backend_for(programs, ids);
    const SynergyGraph g = mine_synergies(ids, r, backend);
    const OracleGraph want = oracle_graph(oracle_counts(programs, r));
    ASSERT_EQ(g.edges.size(), want.weights.size());
    for (const auto& e : g.edges) {
      EXPECT_NEAR(e.weight, want.weights.at({e.from, e.to}), 1e-12);
    }
    ASSERT_EQ(g.start_weights.size(), want.starts.size());
    for (const auto& [pass, w] : g.start_weights) EXPECT_NEAR(w, want.starts.at(pass), 1e-12);
  }
}

TEST(Synergy, ParallelMatchesSequential) {
  Rng rng(22);
  const PassRegistry r = gen::random_registry(6, rng);
  std::vector<MockProgram> programs;
  for (int i = 0; i < 4; ++i) programs.push_back(gen::random_mock(r, rng));
  std::vector<ProgramRef> ids;
  const MockBackend backend = backend_for(programs, ids);
  MiningOptions wide;
  wide.parallel = 4;
  EXPECT_EQ(mine_synergies(ids, r, backend), mine_synergies(ids, r, backend, wide));
}

TEST(Synergy, CheckpointResumeMatchesUninterruptedRun) {
  Rng rng(23);
  const PassRegistry r = gen::random_registry(5, rng);
  std::vector<MockProgram> programs;
  for (int i = 0; i < 5; ++i) programs.push_back(gen::random_mock(r, rng));
  std::vector<ProgramRef> ids;
  const MockBackend backend = backend_for(programs, ids);
  const SynergyGraph full = mine_synergies(ids, r, backend);

  const auto dir = std::filesystem::temp_directory_path() / "npmtune-checkpoint-test";
  std::filesystem::create_directories(dir);
  MiningOptions opts;
  opts.checkpoint_path = (dir / "ck.json").string();
  std::filesystem::remove(opts.checkpoint_path);
  opts.max_programs = 2;
  MiningStats first;
  (void)mine_synergies(ids, r, backend, opts, &first);
  EXPECT_FALSE(first.complete);
  EXPECT_EQ(first.programs_processed, 2u);
  EXPECT_TRUE(std::filesystem::exists(opts.checkpoint_path));

  opts.max_programs = 0;
  MiningStats second;
  const SynergyGraph resumed = mine_synergies(ids, r, backend, opts, &second);
  EXPECT_TRUE(second.complete);
  EXPECT_EQ(second.programs_resumed, 2u);
  EXPECT_EQ(second.programs_processed, 3u);
  EXPECT_EQ(resumed, full);
  std::filesystem::remove_all(dir);
}

TEST(Synergy, JsonRoundTrip) {
  Rng rng(24);
  const PassRegistry r = gen::random_registry(6, rng);
  MockBackend backend;
  backend.add("p", gen::random_mock(r, rng, {4, 0.5, 0.6, 0.5, 10}));
  const SynergyGraph g = mine_synergies({"p"}, r, backend);
  EXPECT_EQ(graph_from_json(graph_to_json(g)), g);
  EXPECT_EQ(g.meta.registry_hash, r.content_hash());
  EXPECT_EQ(g.meta.dataset_size, 1u);
}

TEST(Synergy, SchemaErrors) {
  const auto code = [](const std::string& text) {
    try {
      graph_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidConfig;
  };
  EXPECT_EQ(code("not json"), ErrorCode::SchemaError);
  EXPECT_EQ(code("{}"), ErrorCode::SchemaError);
  EXPECT_EQ(code(R"({"nodes":["a","b"],"edges":[{"from":"a","to":"b","type":"intra-level","weight":0.5}],
                     "start_weights":{"a":1.0},"meta":{"registry_hash":"x","dataset_size":1}})"),
            ErrorCode::SchemaError);
  EXPECT_THROW(load_graph(kData + "/absent-graph.json"), Error);
}

TEST(Skeleton, RepresentativeShapes) {
  const PassRegistry& d = default_registry();
  const auto text = [&](const char* a, const char* b) {
    return print_pipeline(build_representative_skeleton(d.at(a), d.at(b)));
  };
  EXPECT_EQ(text("gvn", "adce"), "module(function(gvn,adce))");
  EXPECT_EQ(text("globalopt", "gvn"), "module(globalopt,function(gvn))");
  EXPECT_EQ(text("gvn", "licm"), "module(function(gvn,loop(licm)))");
  EXPECT_EQ(text("inline", "licm"), "module(cgscc(inline,function(loop(licm))))");
  EXPECT_EQ(text("licm", "gvn"), "module(function(loop(licm))),module(function(gvn))");
  EXPECT_EQ(text("gvn", "globalopt"), "module(function(gvn)),module(globalopt)");
  EXPECT_EQ(classify_synergy_type(d.at("gvn"), d.at("adce")), SynergyType::IntraLevel);
  EXPECT_EQ(classify_synergy_type(d.at("gvn"), d.at("licm")), SynergyType::InterLevel);
}

TEST(Skeleton, MatchesReferenceTable) {
  Rng rng(25);
  const PassRegistry r = gen::random_registry(12, rng);
  for (const auto& a : r.entries()) {
    for (const auto& b : r.entries()) {
      EXPECT_EQ(print_pipeline(build_representative_skeleton(a, b)),
                reference::pair_skeleton(a.name, gen::level_letter(a.level), b.name,
                                         gen::level_letter(b.level)));
    }
  }
}
