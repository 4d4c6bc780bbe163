#include "npmtune/pass_registry.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "npmtune/error.hpp"

namespace npmtune {

std::string_view to_string(PassLevel level) {
  switch (level) {
    case PassLevel::Module: return "module";
    case PassLevel::CGSCC: return "cgscc";
    case PassLevel::Function: return "function";
    case PassLevel::Loop: return "loop";
  }
  return "module";
}

std::optional<PassLevel> parse_level(std::string_view text) {
  if (text == "module") return PassLevel::Module;
  if (text == "cgscc") return PassLevel::CGSCC;
  if (text == "function") return PassLevel::Function;
  if (text == "loop") return PassLevel::Loop;
  return std::nullopt;
}

char level_tag(PassLevel level) {
  static constexpr char kTags[] = {'M', 'C', 'F', 'L'};
  return kTags[static_cast<int>(level)];
}

bool is_valid_pass_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '<' || c == '>';
    if (!ok) return false;
  }
  return true;
}

void PassRegistry::add(PassInfo info) {
  if (!is_valid_pass_name(info.name)) {
    throw Error(ErrorCode::ParseError, "invalid pass name '" + info.name + "'");
  }
  if (index_.contains(info.name)) {
    throw Error(ErrorCode::DuplicatePass, "duplicate pass '" + info.name + "'");
  }
  index_.emplace(info.name, entries_.size());
  entries_.push_back(std::move(info));
}

const PassInfo* PassRegistry::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const PassInfo& PassRegistry::at(std::string_view name) const {
  const PassInfo* info = find(name);
  if (info == nullptr) {
    throw Error(ErrorCode::UnknownPass, "unknown pass '" + std::string(name) + "'");
  }
  return *info;
}

std::string PassRegistry::serialize() const {
  std::string out;
  for (const PassInfo& info : entries_) {
    out += info.name;
    out += '=';
    out += info.polymorphic ? std::string_view("any") : to_string(info.level);
    out += '\n';
  }
  return out;
}

std::string PassRegistry::content_hash() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

PassRegistry load_registry(std::string_view source) {
  PassRegistry registry;
  std::size_t line_no = 0;
  while (!source.empty()) {
    ++line_no;
    const auto eol = source.find('\n');
    std::string_view line = source.substr(0, eol);
    source = eol == std::string_view::npos ? std::string_view{} : source.substr(eol + 1);

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected name=level");
    }
    const std::string_view name = trim(line.substr(0, eq));
    const std::string_view level_text = trim(line.substr(eq + 1));
    PassInfo info{std::string(name), PassLevel::Module, false};
    if (level_text == "any") {
      info.polymorphic = true;
    } else if (auto level = parse_level(level_text)) {
      info.level = *level;
    } else {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                             ": unknown level '" + std::string(level_text) +
                                             "'");
    }
    if (!is_valid_pass_name(info.name)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                             ": invalid pass name '" + info.name + "'");
    }
    registry.add(std::move(info));
  }
  return registry;
}

PassRegistry load_registry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot read registry file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_registry(buf.str());
}

PassLevel level_of(const PassRegistry& registry, std::string_view name) {
  return registry.at(name).level;
}

const PassRegistry& default_registry() {
  static const PassRegistry registry = load_registry(R"(# module passes
globalopt=module
strip=module
scc-oz-module-inliner=module
ipsccp=module
deadargelim=module
globaldce=module
constmerge=module
mergefunc=module
called-value-propagation=module
elim-avail-extern=module
# cgscc passes
inline=cgscc
function-attrs=cgscc
argpromotion=cgscc
# function passes
gvn=function
instcombine=function
adce=function
jump-threading=function
correlated-propagation=function
reassociate=function
slp-vectorizer=function
vector-combine=function
tsan=function
gvn-hoist=function
bounds-checking=function
instsimplify=function
memcpyopt=function
scalarize-masked-mem-intrin=function
simplifycfg=function
sroa=function
early-cse=function
mem2reg=function
dse=function
sccp=function
tailcallelim=function
aggressive-instcombine=function
div-rem-pairs=function
float2int=function
mldst-motion=function
loop-sink=function
# loop passes
loop-deletion=loop
licm=loop
loop-rotate=loop
loop-instsimplify=loop
loop-simplifycfg=loop
indvars=loop
loop-idiom=loop
simple-loop-unswitch=loop
# scope follows the enclosing manager
invalidate<all>=any
)");
  return registry;
}

}  // namespace npmtune
