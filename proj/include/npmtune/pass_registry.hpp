#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace npmtune {

/// IR granularity a pass operates on, ordered by nesting depth.
enum class PassLevel : std::uint8_t { Module = 0, CGSCC = 1, Function = 2, Loop = 3 };

std::string_view to_string(PassLevel level);
/// Accepts `module|cgscc|function|loop`.
std::optional<PassLevel> parse_level(std::string_view text);
/// One-letter tag (M/C/F/L) used in tables.
char level_tag(PassLevel level);

struct PassInfo {
  std::string name;
  PassLevel level = PassLevel::Module;
  /// Polymorphic passes (`invalidate<all>`) take the level of their enclosing
  /// manager; `level` is then only the default used for standalone placement.
  bool polymorphic = false;

  friend bool operator==(const PassInfo&, const PassInfo&) = default;
};

/// True for tokens made of lowercase letters, digits, '-', '<', '>'.
bool is_valid_pass_name(std::string_view name);

class PassRegistry {
 public:
  PassRegistry() = default;

  /// Throws DuplicatePass or ParseError (bad name).
  void add(PassInfo info);

  [[nodiscard]] const PassInfo* find(std::string_view name) const;
  [[nodiscard]] bool contains(std::string_view name) const { return find(name) != nullptr; }
  /// Throws UnknownPass.
  [[nodiscard]] const PassInfo& at(std::string_view name) const;

  [[nodiscard]] const std::vector<PassInfo>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }

  /// Registry file text; `load_registry(serialize())` reproduces this registry.
  [[nodiscard]] std::string serialize() const;
  /// FNV-1a of serialize(), hex encoded. Stamped into graph and checkpoint files.
  [[nodiscard]] std::string content_hash() const;

  friend bool operator==(const PassRegistry& a, const PassRegistry& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<PassInfo> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses the line-oriented `name=level` format. `#` starts a comment; the
/// level `any` marks a polymorphic pass.
PassRegistry load_registry(std::string_view source);
PassRegistry load_registry_file(const std::string& path);

/// Throws UnknownPass.
PassLevel level_of(const PassRegistry& registry, std::string_view name);

/// Every pass the tuner knows about without an LLVM install.
const PassRegistry& default_registry();

}  // namespace npmtune
