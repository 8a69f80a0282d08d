#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace armorcage {

// Variable bindings such as @{HOME} -> {"/home/*/", "/root/"}.
class VariableTable {
 public:
  VariableTable() = default;

  void define(const std::string& name, std::vector<std::string> values);
  void append(const std::string& name, const std::vector<std::string>& values);
  bool contains(const std::string& name) const;
  const std::vector<std::string>* find(const std::string& name) const;
  const std::map<std::string, std::vector<std::string>>& bindings() const {
    return bindings_;
  }
  bool empty() const { return bindings_.empty(); }

  friend bool operator==(const VariableTable&, const VariableTable&) = default;

 private:
  std::map<std::string, std::vector<std::string>> bindings_;
};

namespace detail {
struct CompiledPattern;
}

// An AppArmor-style path glob compiled against a variable table.
//
//   *      run of non-'/' characters
//   **     run of any characters, including '/'
//   ?      one non-'/' character
//   [...]  character class ('^' or '!' negates; never matches '/')
//   {a,b}  alternation, one nesting level, empty branches allowed
//   @{V}   variable expansion; multiple values form a union
//
// A '*' or '**' that directly follows a '/' must consume at least one
// character and may not start with '/', so "/tmp/**" does not match "/tmp/"
// and "/bin/*" does not match "/bin/".
class PathPattern {
 public:
  // Throws PatternError.
  static PathPattern compile(std::string_view source, const VariableTable& vars);

  const std::string& source() const { return source_; }
  bool matches(std::string_view path) const;
  // True when the source has no glob, alternation or variable syntax.
  bool is_literal() const;
  // Expanded alternatives after variable and brace expansion.
  const std::vector<std::string>& expansions() const;

  friend bool operator==(const PathPattern& a, const PathPattern& b) {
    return a.source_ == b.source_;
  }

 private:
  PathPattern() = default;

  std::string source_;
  std::shared_ptr<const detail::CompiledPattern> compiled_;
};

inline PathPattern compile_pattern(std::string_view source, const VariableTable& vars) {
  return PathPattern::compile(source, vars);
}

inline bool matches(const PathPattern& pattern, std::string_view path) {
  return pattern.matches(path);
}

// Escapes glob metacharacters so the result compiles to a literal matcher.
std::string escape_glob(std::string_view literal);

}  // namespace armorcage
