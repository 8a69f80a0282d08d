#include "armorcage/pattern.hpp"

#include <algorithm>
#include <bitset>
#include <set>
#include <string>
#include <vector>

#include "armorcage/error.hpp"

namespace armorcage {

void VariableTable::define(const std::string& name, std::vector<std::string> values) {
  bindings_[name] = std::move(values);
}

void VariableTable::append(const std::string& name, const std::vector<std::string>& values) {
  auto& slot = bindings_[name];
  slot.insert(slot.end(), values.begin(), values.end());
}

bool VariableTable::contains(const std::string& name) const { return bindings_.count(name) != 0; }

const std::vector<std::string>* VariableTable::find(const std::string& name) const {
  const auto it = bindings_.find(name);
  return it == bindings_.end() ? nullptr : &it->second;
}

namespace detail {

struct Token {
  enum class Kind : std::uint8_t { literal, char_class, star, double_star };
  Kind kind = Kind::literal;
  char ch = 0;
  std::bitset<256> set;
};

struct Program {
  std::vector<Token> tokens;

  bool run(std::string_view path) const {
    const std::size_t n = tokens.size();
    std::vector<char> cur(n + 1, 0), next(n + 1, 0);
    cur[0] = 1;
    close(cur);
    for (const char c : path) {
      std::fill(next.begin(), next.end(), 0);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!cur[i]) continue;
        const Token& t = tokens[i];
        switch (t.kind) {
          case Token::Kind::literal:
            if (t.ch == c) next[i + 1] = any = true;
            break;
          case Token::Kind::char_class:
            if (t.set.test(static_cast<unsigned char>(c))) next[i + 1] = any = true;
            break;
          case Token::Kind::star:
            if (c != '/') next[i] = any = true;
            break;
          case Token::Kind::double_star:
            next[i] = any = true;
            break;
        }
      }
      if (!any) return false;
      close(next);
      cur.swap(next);
    }
    return cur[n] != 0;
  }

  void close(std::vector<char>& states) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (states[i] && (tokens[i].kind == Token::Kind::star ||
                        tokens[i].kind == Token::Kind::double_star)) {
        states[i + 1] = 1;
      }
    }
  }

  bool literal() const {
    return std::all_of(tokens.begin(), tokens.end(),
                       [](const Token& t) { return t.kind == Token::Kind::literal; });
  }
};

struct CompiledPattern {
  std::vector<std::string> expansions;
  std::vector<Program> programs;
  bool literal = false;
};

}  // namespace detail

namespace {

using detail::Program;
using detail::Token;

bool is_var_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::vector<std::string> cross(const std::vector<std::string>& heads,
                               const std::vector<std::string>& tails) {
  std::vector<std::string> out;
  out.reserve(heads.size() * tails.size());
  for (const auto& h : heads)
    for (const auto& t : tails) out.push_back(h + t);
  return out;
}

std::vector<std::string> expand_variables(std::string_view text, const VariableTable& vars,
                                          std::vector<std::string>& stack, std::size_t base) {
  std::vector<std::string> acc{std::string()};
  std::string run;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size()) {
      run += c;
      run += text[++i];
      continue;
    }
    if (c == '@' && i + 1 < text.size() && text[i + 1] == '{') {
      const std::size_t close = text.find('}', i + 2);
      if (close == std::string_view::npos) {
        throw PatternError("unterminated variable reference", base + i);
      }
      const std::string name(text.substr(i + 2, close - i - 2));
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_var_name_char)) {
        throw PatternError("invalid variable name '" + name + "'", base + i);
      }
      const auto* values = vars.find(name);
      if (values == nullptr) throw PatternError("unknown variable @{" + name + "}", base + i);
      if (std::find(stack.begin(), stack.end(), name) != stack.end()) {
        throw PatternError("recursive variable @{" + name + "}", base + i);
      }
      stack.push_back(name);
      std::vector<std::string> alternatives;
      for (const auto& value : *values) {
        auto expanded = expand_variables(value, vars, stack, base + i);
        alternatives.insert(alternatives.end(), expanded.begin(), expanded.end());
      }
      stack.pop_back();
      acc = cross(cross(acc, {run}), alternatives);
      run.clear();
      i = close;
      continue;
    }
    run += c;
  }
  return cross(acc, {run});
}

// Index just past the ']' closing a class that opens at `open`.
std::size_t skip_class(std::string_view text, std::size_t open) {
  std::size_t i = open + 1;
  if (i < text.size() && (text[i] == '^' || text[i] == '!')) ++i;
  if (i < text.size() && text[i] == ']') ++i;
  for (; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      ++i;
      continue;
    }
    if (text[i] == ']') return i + 1;
  }
  throw PatternError("unbalanced '[' in pattern", open);
}

std::vector<std::string> expand_braces(std::string_view text) {
  std::vector<std::string> acc{std::string()};
  std::string run;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size()) {
      run += c;
      run += text[++i];
      continue;
    }
    if (c == '[') {
      const std::size_t end = skip_class(text, i);
      run.append(text.substr(i, end - i));
      i = end - 1;
      continue;
    }
    if (c == '}') throw PatternError("unbalanced '}' in pattern", i);
    if (c != '{') {
      run += c;
      continue;
    }
    std::vector<std::string> branches{std::string()};
    std::size_t j = i + 1;
    bool closed = false;
    for (; j < text.size(); ++j) {
      const char d = text[j];
      if (d == '\\' && j + 1 < text.size()) {
        branches.back() += d;
        branches.back() += text[++j];
      } else if (d == '[') {
        const std::size_t end = skip_class(text, j);
        branches.back().append(text.substr(j, end - j));
        j = end - 1;
      } else if (d == '{') {
        throw PatternError("nested alternation is not supported", j);
      } else if (d == ',') {
        branches.emplace_back();
      } else if (d == '}') {
        closed = true;
        break;
      } else {
        branches.back() += d;
      }
    }
    if (!closed) throw PatternError("unbalanced '{' in pattern", i);
    acc = cross(cross(acc, {run}), branches);
    run.clear();
    i = j;
  }
  return cross(acc, {run});
}

std::string collapse_slashes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      out += text[i];
      out += text[++i];
      continue;
    }
    if (text[i] == '/' && !out.empty() && out.back() == '/') continue;
    out += text[i];
  }
  return out;
}

std::bitset<256> parse_class(std::string_view text, std::size_t& i) {
  std::bitset<256> set;
  ++i;  // '['
  bool negate = false;
  if (i < text.size() && (text[i] == '^' || text[i] == '!')) {
    negate = true;
    ++i;
  }
  bool first = true;
  while (i < text.size() && (text[i] != ']' || first)) {
    first = false;
    unsigned char lo = static_cast<unsigned char>(text[i]);
    if (text[i] == '\\' && i + 1 < text.size()) lo = static_cast<unsigned char>(text[++i]);
    ++i;
    if (i + 1 < text.size() && text[i] == '-' && text[i + 1] != ']') {
      unsigned char hi = static_cast<unsigned char>(text[i + 1]);
      i += 2;
      if (hi == '\\' && i < text.size()) hi = static_cast<unsigned char>(text[i++]);
      if (hi < lo) throw PatternError("reversed character range", i);
      for (unsigned v = lo; v <= hi; ++v) set.set(v);
    } else {
      set.set(lo);
    }
  }
  if (i >= text.size()) throw PatternError("unbalanced '[' in pattern", i);
  ++i;  // ']'
  if (negate) set.flip();
  set.reset(static_cast<unsigned char>('/'));
  set.reset(0);
  return set;
}

Program tokenize(std::string_view text) {
  Program program;
  auto& out = program.tokens;
  std::bitset<256> not_slash;
  not_slash.set();
  not_slash.reset(static_cast<unsigned char>('/'));
  not_slash.reset(0);

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size()) {
      out.push_back({Token::Kind::literal, text[i + 1], {}});
      i += 2;
    } else if (c == '*') {
      std::size_t stars = 0;
      while (i < text.size() && text[i] == '*') {
        ++stars;
        ++i;
      }
      const bool after_slash =
          !out.empty() && out.back().kind == Token::Kind::literal && out.back().ch == '/';
      if (after_slash) out.push_back({Token::Kind::char_class, 0, not_slash});
      out.push_back({stars >= 2 ? Token::Kind::double_star : Token::Kind::star, 0, {}});
    } else if (c == '?') {
      out.push_back({Token::Kind::char_class, 0, not_slash});
      ++i;
    } else if (c == '[') {
      out.push_back({Token::Kind::char_class, 0, parse_class(text, i)});
    } else {
      out.push_back({Token::Kind::literal, c, {}});
      ++i;
    }
  }
  return program;
}

}  // namespace

PathPattern PathPattern::compile(std::string_view source, const VariableTable& vars) {
  if (source.empty()) throw PatternError("empty pattern", 0);
  if (source.front() != '/' && source.substr(0, 2) != "@{") {
    throw PatternError("pattern must start with '/' or a variable: " + std::string(source), 0);
  }

  auto compiled = std::make_shared<detail::CompiledPattern>();
  std::vector<std::string> stack;
  std::set<std::string> seen;
  for (const auto& with_vars : expand_variables(source, vars, stack, 0)) {
    for (const auto& variant : expand_braces(with_vars)) {
      std::string flat = collapse_slashes(variant);
      if (flat.empty() || flat.front() != '/') {
        throw PatternError("expansion is not an absolute path: " + flat, 0);
      }
      if (!seen.insert(flat).second) continue;
      compiled->programs.push_back(tokenize(flat));
      compiled->expansions.push_back(std::move(flat));
    }
  }
  compiled->literal = compiled->programs.size() == 1 && compiled->programs.front().literal();

  PathPattern p;
  p.source_ = std::string(source);
  p.compiled_ = std::move(compiled);
  return p;
}

bool PathPattern::matches(std::string_view path) const {
  if (!compiled_) return false;
  return std::any_of(compiled_->programs.begin(), compiled_->programs.end(),
                     [&](const Program& prog) { return prog.run(path); });
}

bool PathPattern::is_literal() const { return compiled_ && compiled_->literal; }

const std::vector<std::string>& PathPattern::expansions() const {
  static const std::vector<std::string> kEmpty;
  return compiled_ ? compiled_->expansions : kEmpty;
}

std::string escape_glob(std::string_view literal) {
  std::string out;
  for (const char c : literal) {
    switch (c) {
      case '*':
      case '?':
      case '[':
      case ']':
      case '{':
      case '}':
      case '@':
      case '\\':
      case ',':
        out += '\\';
        [[fallthrough]];
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace armorcage
