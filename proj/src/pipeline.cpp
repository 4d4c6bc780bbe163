#include "npmtune/pipeline.hpp"

#include <cctype>
#include <optional>

#include "npmtune/error.hpp"

namespace npmtune {

PipelineNode PipelineNode::manager(PassLevel level, std::vector<PipelineNode> children) {
  PipelineNode node;
  node.kind = Kind::Manager;
  node.level = level;
  node.children = std::move(children);
  return node;
}

PipelineNode PipelineNode::leaf(std::string pass, PassLevel level) {
  PipelineNode node;
  node.kind = Kind::Leaf;
  node.level = level;
  node.pass = std::move(pass);
  return node;
}

bool manager_admits_manager(PassLevel parent, PassLevel child) {
  switch (parent) {
    case PassLevel::Module: return child != PassLevel::Loop;
    case PassLevel::CGSCC: return child == PassLevel::CGSCC || child == PassLevel::Function;
    case PassLevel::Function: return child == PassLevel::Function || child == PassLevel::Loop;
    case PassLevel::Loop: return child == PassLevel::Loop;
  }
  return false;
}

std::string_view element_rule(PassLevel level) {
  static constexpr std::string_view kRules[] = {"R3", "R5", "R7", "R9"};
  return kRules[static_cast<int>(level)];
}

std::string_view manager_rule(PassLevel level) {
  static constexpr std::string_view kRules[] = {"R2", "R4", "R6", "R8"};
  return kRules[static_cast<int>(level)];
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::TopLevelNotModule: return "TopLevelNotModule";
    case ViolationKind::LevelMismatch: return "LevelMismatch";
    case ViolationKind::EmptyManager: return "EmptyManager";
    case ViolationKind::UnknownPass: return "UnknownPass";
    case ViolationKind::EmptyPipeline: return "EmptyPipeline";
  }
  return "Unknown";
}

bool ValidationReport::cites(std::string_view rule) const {
  for (const Violation& v : violations) {
    if (v.rule == rule) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const Violation& v : violations) {
    out += v.rule;
    out += ' ';
    out += npmtune::to_string(v.kind);
    out += " at [";
    for (std::size_t i = 0; i < v.path.size(); ++i) {
      if (i != 0) out += ',';
      out += std::to_string(v.path[i]);
    }
    out += "]: ";
    out += v.message;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// validate

namespace {

class Validator {
 public:
  explicit Validator(const PassRegistry& registry) : registry_(registry) {}

  ValidationReport run(const PipelineForest& forest) {
    if (forest.trees.empty()) {
      add({}, "R1", ViolationKind::EmptyPipeline, "pipeline has no module manager");
    }
    for (std::size_t i = 0; i < forest.trees.size(); ++i) {
      const PipelineNode& root = forest.trees[i];
      NodePath path{i};
      if (!root.is_manager() || root.level != PassLevel::Module) {
        add(path, "R1", ViolationKind::TopLevelNotModule,
            root.is_leaf() ? "pass '" + root.pass + "' at top level"
                           : std::string(to_string(root.level)) + " manager at top level");
      }
      if (root.is_manager()) visit_manager(root, path);
    }
    return std::move(report_);
  }

 private:
  void visit_manager(const PipelineNode& manager, NodePath& path) {
    if (manager.children.empty()) {
      add(path, std::string(manager_rule(manager.level)), ViolationKind::EmptyManager,
          std::string(to_string(manager.level)) + " manager has no elements");
    }
    const std::string rule(element_rule(manager.level));
    for (std::size_t i = 0; i < manager.children.size(); ++i) {
      const PipelineNode& child = manager.children[i];
      path.push_back(i);
      if (child.is_manager()) {
        if (!manager_admits_manager(manager.level, child.level)) {
          add(path, rule, ViolationKind::LevelMismatch,
              std::string(to_string(child.level)) + " manager inside " +
                  std::string(to_string(manager.level)) + " manager");
        }
        visit_manager(child, path);
      } else {
        visit_leaf(manager, child, path, rule);
      }
      path.pop_back();
    }
  }

  void visit_leaf(const PipelineNode& parent, const PipelineNode& leaf, const NodePath& path,
                  const std::string& rule) {
    const PassInfo* info = registry_.find(leaf.pass);
    if (info == nullptr) {
      add(path, rule, ViolationKind::UnknownPass, "unknown pass '" + leaf.pass + "'");
      return;
    }
    if (!info->polymorphic && info->level != leaf.level) {
      add(path, rule, ViolationKind::LevelMismatch,
          "pass '" + leaf.pass + "' is registered at " + std::string(to_string(info->level)) +
              " level but labelled " + std::string(to_string(leaf.level)));
      return;
    }
    if (leaf.level != parent.level) {
      add(path, rule, ViolationKind::LevelMismatch,
          std::string(to_string(leaf.level)) + " pass '" + leaf.pass + "' inside " +
              std::string(to_string(parent.level)) + " manager");
    }
  }

  void add(const NodePath& path, std::string rule, ViolationKind kind, std::string message) {
    report_.violations.push_back({path, std::move(rule), kind, std::move(message)});
  }

  const PassRegistry& registry_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const PipelineForest& forest, const PassRegistry& registry) {
  return Validator(registry).run(forest);
}

// ---------------------------------------------------------------------------
// parse

namespace {

class Parser {
 public:
  Parser(std::string_view text, const PassRegistry& registry)
      : text_(text), registry_(registry) {}

  PipelineForest run() {
    PipelineForest forest;
    skip_space();
    if (pos_ == text_.size()) fail(ErrorCode::SyntaxError, "empty pipeline");
    for (;;) {
      forest.trees.push_back(element(std::nullopt));
      skip_space();
      if (pos_ == text_.size()) break;
      expect(',');
    }
    if (deferred_) throw Error(deferred_->first, deferred_->second);
    return forest;
  }

 private:
  PipelineNode element(std::optional<PassLevel> parent) {
    skip_space();
    const std::size_t start = pos_;
    const std::string name = read_name();
    skip_space();
    if (peek() == '(') {
      const auto level = parse_level(name);
      if (!level) {
        fail(ErrorCode::SyntaxError, "'(' after pass name '" + name + "' at offset " +
                                         std::to_string(start));
      }
      if (!parent && *level != PassLevel::Module) {
        defer(ErrorCode::TopLevelNotModule,
              "R1: top-level element '" + name + "' is not a module manager");
      }
      if (parent && !manager_admits_manager(*parent, *level)) {
        defer(ErrorCode::LevelMismatch, std::string(element_rule(*parent)) + ": " + name +
                                            " manager inside " +
                                            std::string(to_string(*parent)) + " manager");
      }
      ++pos_;
      skip_space();
      PipelineNode node = PipelineNode::manager(*level);
      if (peek() == ')') {
        defer(ErrorCode::EmptyManager,
              std::string(manager_rule(*level)) + ": empty " + name + " manager");
        ++pos_;
        return node;
      }
      for (;;) {
        node.children.push_back(element(*level));
        skip_space();
        if (peek() == ')') break;
        expect(',');
      }
      ++pos_;
      return node;
    }

    if (!parent) {
      defer(ErrorCode::TopLevelNotModule,
            "R1: top-level element '" + name + "' is not a module manager");
      return PipelineNode::leaf(name, PassLevel::Module);
    }
    const PassInfo* info = registry_.find(name);
    if (info == nullptr) {
      defer(ErrorCode::UnknownPass, "unknown pass '" + name + "'");
      return PipelineNode::leaf(name, parent.value_or(PassLevel::Module));
    }
    const PassLevel level = info->polymorphic ? parent.value_or(PassLevel::Module) : info->level;
    if (level != *parent) {
      defer(ErrorCode::LevelMismatch, std::string(element_rule(*parent)) + ": " +
                                          std::string(to_string(level)) + " pass '" + name +
                                          "' inside " + std::string(to_string(*parent)) +
                                          " manager");
    }
    return PipelineNode::leaf(name, level);
  }

  void defer(ErrorCode code, std::string message) {
    if (!deferred_) deferred_.emplace(code, std::move(message));
  }

  std::string read_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ',' || c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    if (pos_ == start) {
      fail(ErrorCode::SyntaxError, pos_ == text_.size()
                                       ? "unexpected end of pipeline"
                                       : "expected a name at offset " + std::to_string(pos_));
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) {
      fail(ErrorCode::SyntaxError, std::string("expected '") + c + "' at offset " +
                                       std::to_string(pos_));
    }
    ++pos_;
  }

  [[nodiscard]] char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::optional<std::pair<ErrorCode, std::string>> deferred_;

  [[noreturn]] static void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  const PassRegistry& registry_;
};

}  // namespace

PipelineForest parse_pipeline(std::string_view text, const PassRegistry& registry) {
  return Parser(text, registry).run();
}

// ---------------------------------------------------------------------------
// print

namespace {

void print_into(const PipelineNode& node, std::string& out) {
  if (node.is_leaf()) {
    out += node.pass;
    return;
  }
  out += to_string(node.level);
  out += '(';
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i != 0) out += ',';
    print_into(node.children[i], out);
  }
  out += ')';
}

}  // namespace

std::string print_node(const PipelineNode& node) {
  std::string out;
  print_into(node, out);
  return out;
}

std::string print_pipeline(const PipelineForest& forest) {
  std::string out;
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    if (i != 0) out += ',';
    print_into(forest.trees[i], out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// queries

namespace {

void collect_leaves(const PipelineNode& node, std::vector<TypedPass>& out) {
  if (node.is_leaf()) {
    out.push_back({node.pass, node.level});
    return;
  }
  for (const PipelineNode& child : node.children) collect_leaves(child, out);
}

std::size_t manager_depth(const PipelineNode& node, StructuralMetrics& metrics) {
  if (node.is_leaf()) return 0;
  metrics.widths.push_back(node.children.size());
  std::size_t deepest = 0;
  for (const PipelineNode& child : node.children) {
    deepest = std::max(deepest, manager_depth(child, metrics));
  }
  return deepest + 1;
}

}  // namespace

std::vector<TypedPass> leaf_sequence(const PipelineForest& forest) {
  std::vector<TypedPass> out;
  for (const PipelineNode& tree : forest.trees) collect_leaves(tree, out);
  return out;
}

std::size_t leaf_count(const PipelineForest& forest) { return leaf_paths(forest).size(); }

StructuralMetrics structural_metrics(const PipelineForest& forest) {
  StructuralMetrics metrics;
  metrics.tree_count = forest.trees.size();
  for (const PipelineNode& tree : forest.trees) {
    metrics.max_depth = std::max(metrics.max_depth, manager_depth(tree, metrics));
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// construction

std::vector<PassLevel> adaptor_chain(PassLevel from, PassLevel to) {
  std::vector<PassLevel> chain;
  PassLevel current = from;
  while (current < to) {
    const PassLevel next =
        (to == PassLevel::Loop && current < PassLevel::Function) ? PassLevel::Function : to;
    chain.push_back(next);
    current = next;
  }
  return chain;
}

PipelineNode nest_block(PassLevel from, PassLevel level, std::vector<PipelineNode> block) {
  const std::vector<PassLevel> chain = adaptor_chain(from, level);
  PipelineNode node = PipelineNode::manager(chain.back(), std::move(block));
  for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it) {
    std::vector<PipelineNode> children;
    children.push_back(std::move(node));
    node = PipelineNode::manager(*it, std::move(children));
  }
  return node;
}

PipelineNode wrap_tree(PassLevel level, std::vector<PipelineNode> block) {
  if (level == PassLevel::Module) return PipelineNode::manager(PassLevel::Module, std::move(block));
  std::vector<PipelineNode> children;
  children.push_back(nest_block(PassLevel::Module, level, std::move(block)));
  return PipelineNode::manager(PassLevel::Module, std::move(children));
}

PipelineNode minimal_wrap(std::string_view pass, PassLevel level) {
  std::vector<PipelineNode> block;
  block.push_back(PipelineNode::leaf(std::string(pass), level));
  return wrap_tree(level, std::move(block));
}

PipelineNode minimal_wrap(std::string_view pass, const PassRegistry& registry) {
  return minimal_wrap(pass, registry.at(pass).level);
}

PipelineForest build_skeleton_variant(int variant, std::string_view module_pass,
                                      std::string_view cgscc_pass,
                                      std::string_view function_pass,
                                      std::string_view loop_pass,
                                      const PassRegistry& registry) {
  using L = PassLevel;
  auto leaf = [&](std::string_view name, PassLevel expected) {
    const PassInfo& info = registry.at(name);
    if (!info.polymorphic && info.level != expected) {
      throw Error(ErrorCode::LevelMismatch,
                  "pass '" + std::string(name) + "' is a " + std::string(to_string(info.level)) +
                      " pass, expected " + std::string(to_string(expected)));
    }
    return PipelineNode::leaf(std::string(name), expected);
  };
  auto mgr = [](L level, std::vector<PipelineNode> children) {
    return PipelineNode::manager(level, std::move(children));
  };

  const PipelineNode m = leaf(module_pass, L::Module);
  const PipelineNode c = leaf(cgscc_pass, L::CGSCC);
  const PipelineNode f = leaf(function_pass, L::Function);
  const PipelineNode l = leaf(loop_pass, L::Loop);
  const PipelineNode f_with_l = mgr(L::Function, {f, mgr(L::Loop, {l})});

  PipelineForest forest;
  switch (variant) {
    case 1:
      forest.trees = {mgr(L::Module, {m}), mgr(L::Module, {mgr(L::CGSCC, {c})}),
                      mgr(L::Module, {mgr(L::Function, {f})}),
                      mgr(L::Module, {mgr(L::Function, {mgr(L::Loop, {l})})})};
      break;
    case 2:
      forest.trees = {mgr(L::Module, {m}), mgr(L::Module, {mgr(L::CGSCC, {c})}),
                      mgr(L::Module, {f_with_l})};
      break;
    case 3:
      forest.trees = {mgr(L::Module, {m, mgr(L::CGSCC, {c})}), mgr(L::Module, {f_with_l})};
      break;
    case 4:
      forest.trees = {mgr(L::Module, {m}), mgr(L::Module, {mgr(L::CGSCC, {c, f_with_l})})};
      break;
    case 5:
      forest.trees = {mgr(L::Module, {m, mgr(L::CGSCC, {c, f_with_l})})};
      break;
    default:
      throw Error(ErrorCode::InvalidConfig,
                  "skeleton variant must be 1..5, got " + std::to_string(variant));
  }
  return forest;
}

// ---------------------------------------------------------------------------
// paths

const PipelineNode& node_at(const PipelineForest& forest, const NodePath& path) {
  const PipelineNode* node = &forest.trees.at(path.at(0));
  for (std::size_t i = 1; i < path.size(); ++i) node = &node->children.at(path[i]);
  return *node;
}

PipelineNode& node_at(PipelineForest& forest, const NodePath& path) {
  PipelineNode* node = &forest.trees.at(path.at(0));
  for (std::size_t i = 1; i < path.size(); ++i) node = &node->children.at(path[i]);
  return *node;
}

namespace {

void collect_paths(const PipelineNode& node, NodePath& path, bool managers,
                   std::vector<NodePath>& out) {
  if (node.is_manager() == managers) out.push_back(path);
  if (node.is_leaf()) return;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    path.push_back(i);
    collect_paths(node.children[i], path, managers, out);
    path.pop_back();
  }
}

std::vector<NodePath> collect_paths(const PipelineForest& forest, bool managers) {
  std::vector<NodePath> out;
  NodePath path;
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    path.assign(1, i);
    collect_paths(forest.trees[i], path, managers, out);
  }
  return out;
}

/// Returns true when `node` became empty.
bool prune_node(PipelineNode& node) {
  if (node.is_leaf()) return false;
  std::erase_if(node.children, [](PipelineNode& child) { return prune_node(child); });
  return node.children.empty();
}

/// Removes the last leaf below `node`; returns false when there is none.
bool remove_last_leaf(PipelineNode& node) {
  for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) {
    if (it->is_leaf()) {
      node.children.erase(std::next(it).base());
      return true;
    }
    if (remove_last_leaf(*it)) return true;
  }
  return false;
}

}  // namespace

std::vector<NodePath> manager_paths(const PipelineForest& forest) {
  return collect_paths(forest, true);
}

std::vector<NodePath> leaf_paths(const PipelineForest& forest) {
  return collect_paths(forest, false);
}

void prune_empty(PipelineForest& forest) {
  std::erase_if(forest.trees, [](PipelineNode& tree) { return prune_node(tree); });
}

void trim_to_length(PipelineForest& forest, std::size_t max_leaves) {
  std::size_t count = leaf_paths(forest).size();
  while (count > max_leaves) {
    for (auto it = forest.trees.rbegin(); it != forest.trees.rend(); ++it) {
      if (remove_last_leaf(*it)) break;
    }
    --count;
  }
  prune_empty(forest);
}

}  // namespace npmtune
