#include <gtest/gtest.h>

#include "generators.hpp"
#include "npmtune/error.hpp"
#include "npmtune/pipeline.hpp"

using namespace npmtune;

namespace {

const PassRegistry& reg() { return default_registry(); }

const char* const kNested = "module(globalopt,cgscc(inline,function(gvn,loop(loop-deletion))))";

ErrorCode parse_error(const std::string& text) {
  try {
    parse_pipeline(text, reg());
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "parsed: " << text;
  return ErrorCode::InvalidConfig;
}

std::string variant(int v) {
  return print_pipeline(build_skeleton_variant(v, "globalopt", "inline", "gvn", "loop-deletion", reg()));
}

}  // namespace

TEST(Parse, FullyNested) {
  const PipelineForest f = parse_pipeline(kNested, reg());
  ASSERT_EQ(f.trees.size(), 1u);
  EXPECT_EQ(structural_metrics(f).max_depth, 4u);
  const auto seq = leaf_sequence(f);
  const std::vector<TypedPass> expected{{"globalopt", PassLevel::Module},
                                        {"inline", PassLevel::CGSCC},
                                        {"gvn", PassLevel::Function},
                                        {"loop-deletion", PassLevel::Loop}};
  EXPECT_EQ(seq, expected);
  EXPECT_TRUE(validate(f, reg()).ok());
}

TEST(Parse, SingleLeaf) {
  const PipelineForest f = parse_pipeline("module(globalopt)", reg());
  ASSERT_EQ(f.trees.size(), 1u);
  EXPECT_EQ(leaf_count(f), 1u);
}

TEST(Parse, Errors) {
  EXPECT_EQ(parse_error("function(gvn)"), ErrorCode::TopLevelNotModule);
  EXPECT_EQ(parse_error("module(function(globalopt))"), ErrorCode::LevelMismatch);
  EXPECT_EQ(parse_error("module(nonexistent)"), ErrorCode::UnknownPass);
  EXPECT_EQ(parse_error("module()"), ErrorCode::EmptyManager);
  EXPECT_EQ(parse_error("module(gvn"), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_error("module(globalopt))"), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_error("module(globalopt,,strip)"), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_error(""), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_error("module(gvn(x))"), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_error("module(loop(licm))"), ErrorCode::LevelMismatch);
}

TEST(Parse, MessagesCiteRules) {
  try {
    parse_pipeline("loop(licm)", reg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("R1"), std::string::npos);
  }
  try {
    parse_pipeline("module(function(globalopt))", reg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("R7"), std::string::npos);
  }
}

TEST(Parse, WhitespaceIgnored) {
  const PipelineForest f = parse_pipeline(" module( globalopt ,\n function( gvn ) ) ", reg());
  EXPECT_EQ(print_pipeline(f), "module(globalopt,function(gvn))");
}

TEST(Parse, PolymorphicTakesEnclosingLevel) {
  const PipelineForest f = parse_pipeline(
      "module(invalidate<all>,function(invalidate<all>,loop(invalidate<all>)))", reg());
  const auto seq = leaf_sequence(f);
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0].level, PassLevel::Module);
  EXPECT_EQ(seq[1].level, PassLevel::Function);
  EXPECT_EQ(seq[2].level, PassLevel::Loop);
  EXPECT_TRUE(validate(f, reg()).ok());
}

TEST(Print, Canonical) {
  EXPECT_EQ(print_pipeline(parse_pipeline(kNested, reg())), kNested);
  EXPECT_EQ(print_pipeline(parse_pipeline("module(globalopt)", reg())), "module(globalopt)");
  EXPECT_EQ(print_pipeline(parse_pipeline("module(strip),module(strip)", reg())),
            "module(strip),module(strip)");
}

TEST(Validate, LoopUnderModuleCitesR3) {
  PipelineForest f;
  f.trees.push_back(PipelineNode::manager(
      PassLevel::Module,
      {PipelineNode::manager(PassLevel::Loop, {PipelineNode::leaf("licm", PassLevel::Loop)})}));
  const ValidationReport r = validate(f, reg());
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(r.cites("R3"));
}

TEST(Validate, EmptyManager) {
  PipelineForest f;
  f.trees.push_back(PipelineNode::manager(
      PassLevel::Module, {PipelineNode::manager(PassLevel::Function, {})}));
  const ValidationReport r = validate(f, reg());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].kind, ViolationKind::EmptyManager);
  EXPECT_EQ(r.violations[0].rule, "R6");
  const NodePath expected{0, 0};
  EXPECT_EQ(r.violations[0].path, expected);
}

TEST(Validate, EmptyForestAndBadRoot) {
  EXPECT_TRUE(validate(PipelineForest{}, reg()).cites("R1"));
  PipelineForest f;
  f.trees.push_back(PipelineNode::leaf("globalopt", PassLevel::Module));
  EXPECT_TRUE(validate(f, reg()).cites("R1"));
}

TEST(Skeleton, FiveVariants) {
  EXPECT_EQ(variant(1),
            "module(globalopt),module(cgscc(inline)),module(function(gvn)),"
            "module(function(loop(loop-deletion)))");
  EXPECT_EQ(variant(2),
            "module(globalopt),module(cgscc(inline)),module(function(gvn,loop(loop-deletion)))");
  EXPECT_EQ(variant(3), "module(globalopt,cgscc(inline)),module(function(gvn,loop(loop-deletion)))");
  EXPECT_EQ(variant(4), "module(globalopt),module(cgscc(inline,function(gvn,loop(loop-deletion))))");
  EXPECT_EQ(variant(5), kNested);
}

TEST(Skeleton, SameSequenceAndValid) {
  const auto base =
      leaf_sequence(build_skeleton_variant(1, "globalopt", "inline", "gvn", "loop-deletion", reg()));
  for (int v = 1; v <= 5; ++v) {
    const PipelineForest f =
        build_skeleton_variant(v, "globalopt", "inline", "gvn", "loop-deletion", reg());
    EXPECT_EQ(leaf_sequence(f), base);
    EXPECT_TRUE(validate(f, reg()).ok());
  }
}

TEST(Skeleton, LevelMismatchAndBadVariant) {
  EXPECT_THROW(build_skeleton_variant(1, "gvn", "inline", "gvn", "licm", reg()), Error);
  try {
    build_skeleton_variant(6, "globalopt", "inline", "gvn", "licm", reg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Metrics, Examples) {
  const auto v5 = structural_metrics(parse_pipeline(variant(5), reg()));
  EXPECT_EQ(v5.tree_count, 1u);
  EXPECT_EQ(v5.max_depth, 4u);
  const auto v1 = structural_metrics(parse_pipeline(variant(1), reg()));
  EXPECT_EQ(v1.tree_count, 4u);
  EXPECT_EQ(v1.max_depth, 3u);
  const auto single = structural_metrics(parse_pipeline("module(globalopt)", reg()));
  EXPECT_EQ(single.tree_count, 1u);
  EXPECT_EQ(single.max_depth, 1u);
  const std::vector<std::size_t> widths{2, 2, 2, 1};
  EXPECT_EQ(v5.widths, widths);
}

TEST(Metrics, SameLevelNestingExceedsFour) {
  const auto m = structural_metrics(
      parse_pipeline("module(function(function(loop(loop(licm)))))", reg()));
  EXPECT_EQ(m.max_depth, 5u);
}

TEST(Wrap, MinimalWrap) {
  auto wrap = [](const char* p) {
    PipelineForest f;
    f.trees.push_back(minimal_wrap(p, reg()));
    return print_pipeline(f);
  };
  EXPECT_EQ(wrap("gvn"), "module(function(gvn))");
  EXPECT_EQ(wrap("loop-deletion"), "module(function(loop(loop-deletion)))");
  EXPECT_EQ(wrap("globalopt"), "module(globalopt)");
  EXPECT_EQ(wrap("inline"), "module(cgscc(inline))");
  EXPECT_THROW(wrap("nonexistent"), Error);
}

TEST(Wrap, AdaptorChains) {
  const std::vector<PassLevel> ml{PassLevel::Function, PassLevel::Loop};
  EXPECT_EQ(adaptor_chain(PassLevel::Module, PassLevel::Loop), ml);
  EXPECT_EQ(adaptor_chain(PassLevel::CGSCC, PassLevel::Loop), ml);
  EXPECT_TRUE(adaptor_chain(PassLevel::Function, PassLevel::Function).empty());
  PipelineForest f;
  f.trees.push_back(PipelineNode::manager(
      PassLevel::Module,
      {nest_block(PassLevel::Module, PassLevel::Loop, {PipelineNode::leaf("licm", PassLevel::Loop)})}));
  EXPECT_EQ(print_pipeline(f), "module(function(loop(licm)))");
}

TEST(Paths, TrimAndPrune) {
  PipelineForest f = parse_pipeline("module(globalopt,function(gvn,adce)),module(function(loop(licm)))", reg());
  EXPECT_EQ(leaf_paths(f).size(), 4u);
  EXPECT_EQ(manager_paths(f).size(), 5u);
  trim_to_length(f, 2);
  EXPECT_EQ(print_pipeline(f), "module(globalopt,function(gvn))");
  EXPECT_TRUE(validate(f, reg()).ok());
}

TEST(Property, RoundTripRandomForests) {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const PipelineForest f = gen::random_forest(reg(), rng);
    ASSERT_TRUE(validate(f, reg()).ok()) << print_pipeline(f);
    const std::string text = print_pipeline(f);
    EXPECT_EQ(text.find(' '), std::string::npos);
    EXPECT_EQ(parse_pipeline(text, reg()), f) << text;
  }
}

TEST(Property, SingleRuleMutantsRejected) {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const PipelineForest f = gen::random_forest(reg(), rng);
    const gen::Mutant m = gen::random_mutant(f, reg(), rng);
    const ValidationReport r = validate(m.forest, reg());
    EXPECT_TRUE(r.cites(m.rule)) << m.what << " expected " << m.rule << "\n" << r.to_string();
  }
}
