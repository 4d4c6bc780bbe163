#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "npmtune/pass_registry.hpp"

namespace npmtune {

/// A manager (`module(...)`, `cgscc(...)`, ...) or a pass leaf.
struct PipelineNode {
  enum class Kind : std::uint8_t { Manager, Leaf };

  Kind kind = Kind::Manager;
  PassLevel level = PassLevel::Module;
  std::string pass;                    // leaves only
  std::vector<PipelineNode> children;  // managers only

  static PipelineNode manager(PassLevel level, std::vector<PipelineNode> children = {});
  static PipelineNode leaf(std::string pass, PassLevel level);

  [[nodiscard]] bool is_manager() const { return kind == Kind::Manager; }
  [[nodiscard]] bool is_leaf() const { return kind == Kind::Leaf; }

  friend bool operator==(const PipelineNode&, const PipelineNode&) = default;
};

/// Ordered list of module-rooted trees; each tree is one optimization stage.
struct PipelineForest {
  std::vector<PipelineNode> trees;

  friend bool operator==(const PipelineForest&, const PipelineForest&) = default;
};

struct TypedPass {
  std::string name;
  PassLevel level = PassLevel::Module;

  friend bool operator==(const TypedPass&, const TypedPass&) = default;
};

/// Position of a node: index into the forest's trees followed by child indices.
using NodePath = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Grammar

/// Whether a manager of level `parent` may directly contain a manager of level
/// `child` (R3, R5, R7, R9).
bool manager_admits_manager(PassLevel parent, PassLevel child);

/// Rule that governs the children of a manager at `level` ("R3", "R5", ...).
std::string_view element_rule(PassLevel level);
/// Rule that defines a manager at `level` ("R2", "R4", "R6", "R8").
std::string_view manager_rule(PassLevel level);

enum class ViolationKind : std::uint8_t {
  TopLevelNotModule,
  LevelMismatch,
  EmptyManager,
  UnknownPass,
  EmptyPipeline,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  NodePath path;
  std::string rule;  // "R1" .. "R9"
  ViolationKind kind = ViolationKind::LevelMismatch;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }
  [[nodiscard]] bool cites(std::string_view rule) const;
  [[nodiscard]] std::string to_string() const;
};

ValidationReport validate(const PipelineForest& forest, const PassRegistry& registry);

// ---------------------------------------------------------------------------
// Text form

/// Parses `opt -passes=` syntax. Whitespace between tokens is ignored.
/// Throws SyntaxError, TopLevelNotModule, LevelMismatch, UnknownPass or
/// EmptyManager. Polymorphic passes take the level of their enclosing manager.
PipelineForest parse_pipeline(std::string_view text, const PassRegistry& registry);

/// Canonical form: no whitespace, comma separated.
std::string print_pipeline(const PipelineForest& forest);
std::string print_node(const PipelineNode& node);

// ---------------------------------------------------------------------------
// Queries

/// Left-to-right depth-first leaf order.
std::vector<TypedPass> leaf_sequence(const PipelineForest& forest);
std::size_t leaf_count(const PipelineForest& forest);

struct StructuralMetrics {
  std::size_t tree_count = 0;
  /// Longest chain of nested managers, counting the root module manager.
  std::size_t max_depth = 0;
  /// Child count of every manager, in pre-order.
  std::vector<std::size_t> widths;
};

StructuralMetrics structural_metrics(const PipelineForest& forest);

// ---------------------------------------------------------------------------
// Construction

/// Managers that have to be opened below a `from` manager to host a `to` leaf,
/// outermost first. Empty when from == to; requires from < to.
std::vector<PassLevel> adaptor_chain(PassLevel from, PassLevel to);

/// Places `block` (elements admissible in a `level` manager) inside the
/// adaptor chain opened below a `from` manager; requires from < level.
/// nest_block(Module, Loop, {licm}) is function(loop(licm)).
PipelineNode nest_block(PassLevel from, PassLevel level, std::vector<PipelineNode> block);

/// A whole tree holding `block` at `level`: module(block) for Module,
/// module(nest_block(Module, level, block)) otherwise.
PipelineNode wrap_tree(PassLevel level, std::vector<PipelineNode> block);

/// module(p) / module(cgscc(p)) / module(function(p)) / module(function(loop(p))).
PipelineNode minimal_wrap(std::string_view pass, PassLevel level);
/// Looks up the level in the registry. Throws UnknownPass.
PipelineNode minimal_wrap(std::string_view pass, const PassRegistry& registry);

/// The five skeletons for a fixed (M, C, F, L) pass sequence:
/// 1 fully sequential, 2 F+L combined, 3 M+C and F+L combined,
/// 4 C+F+L combined, 5 fully nested. Throws LevelMismatch.
PipelineForest build_skeleton_variant(int variant, std::string_view module_pass,
                                      std::string_view cgscc_pass,
                                      std::string_view function_pass,
                                      std::string_view loop_pass, const PassRegistry& registry);

// ---------------------------------------------------------------------------
// Path helpers used by the genetic operators

const PipelineNode& node_at(const PipelineForest& forest, const NodePath& path);
PipelineNode& node_at(PipelineForest& forest, const NodePath& path);

/// Pre-order paths of every manager (roots included).
std::vector<NodePath> manager_paths(const PipelineForest& forest);
/// Paths of every leaf in leaf_sequence order.
std::vector<NodePath> leaf_paths(const PipelineForest& forest);

/// Removes managers left without children (and empty trees).
void prune_empty(PipelineForest& forest);

/// Drops trailing leaves until at most `max_leaves` remain.
void trim_to_length(PipelineForest& forest, std::size_t max_leaves);

}  // namespace npmtune
