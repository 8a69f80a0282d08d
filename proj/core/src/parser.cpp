#include "armorcage/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace armorcage {

ParseError::ParseError(std::string file, int line, int column, std::string message)
    : Error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      file_(std::move(file)),
      line_(line),
      column_(column),
      detail_(std::move(message)) {}

namespace {

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

DirectoryResolver::DirectoryResolver(std::vector<std::filesystem::path> roots)
    : roots_(std::move(roots)) {}

std::optional<IncludeResolver::Resolved> DirectoryResolver::resolve(std::string_view target) const {
  const std::filesystem::path t(target);
  if (t.is_absolute()) {
    if (auto text = read_file(t)) return Resolved{t.string(), std::move(*text)};
    return std::nullopt;
  }
  for (const auto& root : roots_) {
    const auto candidate = root / t;
    if (auto text = read_file(candidate)) return Resolved{candidate.string(), std::move(*text)};
  }
  return std::nullopt;
}

std::optional<IncludeResolver::Resolved> MemoryResolver::resolve(std::string_view target) const {
  const auto it = files_.find(target);
  if (it == files_.end()) return std::nullopt;
  return Resolved{std::string(target), it->second};
}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { word, path, lbrace, rbrace, comma, arrow, equals, plus_equals, include, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      if (at_end()) break;
      out.push_back(next());
    }
    Token end;
    end.kind = Tok::end;
    const auto [line, col] = end_position();
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

  [[noreturn]] void fail(int line, int col, const std::string& message) const {
    throw ParseError(file_, line, col, message);
  }

  // Position of the last character that is not a line break; errors that
  // surface at end of input point there.
  std::pair<int, int> end_position() const {
    int line = 1, col = 1, last_line = 1, last_col = 1;
    for (const char c : text_) {
      if (c == '\n') {
        ++line;
        col = 1;
        continue;
      }
      if (c != '\r') {
        last_line = line;
        last_col = col;
      }
      ++col;
    }
    return {last_line, last_col};
  }

  void skip_space() {
    while (!at_end()) {
      const char c = peek();
      if (is_space(c)) {
        advance();
      } else if (c == '#' && !starts_include()) {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  bool starts_include() const {
    const auto rest = text_.substr(pos_);
    if (rest.substr(0, 8) != "#include") return false;
    return rest.size() == 8 || is_space(rest[8]) || rest[8] == '<' || rest[8] == '"';
  }

  bool starts_include_keyword() const {
    const auto rest = text_.substr(pos_);
    if (rest.substr(0, 7) != "include") return false;
    std::size_t i = 7;
    if (i >= rest.size() || (rest[i] != ' ' && rest[i] != '\t')) return false;
    while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
    return i < rest.size() && (rest[i] == '<' || rest[i] == '"');
  }

  Token make(Tok kind, int line, int col, std::string text = {}) const {
    Token t;
    t.kind = kind;
    t.line = line;
    t.column = col;
    t.text = std::move(text);
    return t;
  }

  Token next() {
    const int line = line_, col = col_;
    const char c = peek();
    if (c == '#' || (c == 'i' && starts_include_keyword())) return include(line, col);
    if (c == '{') {
      advance();
      return make(Tok::lbrace, line, col);
    }
    if (c == '}') {
      advance();
      return make(Tok::rbrace, line, col);
    }
    if (c == ',') {
      advance();
      return make(Tok::comma, line, col);
    }
    if (c == '-' && peek(1) == '>') {
      advance();
      advance();
      return make(Tok::arrow, line, col);
    }
    if (c == '=') {
      advance();
      return make(Tok::equals, line, col);
    }
    if (c == '+' && peek(1) == '=') {
      advance();
      advance();
      return make(Tok::plus_equals, line, col);
    }
    if (c == '"') return quoted(line, col);
    if (c == '/' || c == '@') return path(line, col);
    return word(line, col);
  }

  Token include(int line, int col) {
    while (!at_end() && !is_space(peek()) && peek() != '<' && peek() != '"') advance();
    while (!at_end() && (peek() == ' ' || peek() == '\t')) advance();
    const char open = peek();
    if (open != '<' && open != '"') fail(line, col, "malformed include directive");
    const char close = open == '<' ? '>' : '"';
    advance();
    std::string target;
    while (!at_end() && peek() != close && peek() != '\n') {
      target += peek();
      advance();
    }
    if (at_end() || peek() != close || target.empty()) {
      fail(line, col, "malformed include directive");
    }
    advance();
    return make(Tok::include, line, col, target);
  }

  Token quoted(int line, int col) {
    advance();
    std::string out;
    while (!at_end() && peek() != '"') {
      if (peek() == '\n') fail(line, col, "unterminated quoted string");
      if (peek() == '\\' && pos_ + 1 < text_.size()) {
        out += peek();
        advance();
      }
      out += peek();
      advance();
    }
    if (at_end()) fail(line, col, "unterminated quoted string");
    advance();
    return make(Tok::path, line, col, out);
  }

  Token path(int line, int col) {
    std::string out;
    int depth = 0;
    const bool variable_head = peek() == '@';
    while (!at_end()) {
      const char c = peek();
      if (is_space(c)) break;
      if (c == '\\' && pos_ + 1 < text_.size()) {
        out += c;
        advance();
        out += peek();
        advance();
        continue;
      }
      if (c == '[') {
        const int bl = line_, bc = col_;
        out += c;
        advance();
        while (!at_end() && peek() != ']' && peek() != '\n') {
          out += peek();
          advance();
        }
        if (at_end() || peek() != ']') fail(bl, bc, "unbalanced '[' in pattern");
        out += ']';
        advance();
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (depth == 0) fail(line_, col_, "unbalanced '}' in pattern '" + out + "}'");
        --depth;
      } else if (c == ',' && depth == 0) {
        break;
      } else if (depth == 0 && variable_head && (c == '=' || (c == '+' && peek(1) == '='))) {
        break;
      }
      out += c;
      advance();
    }
    if (depth > 0) fail(line, col, "unbalanced '{' in pattern '" + out + "'");
    return make(Tok::path, line, col, out);
  }

  Token word(int line, int col) {
    std::string out;
    int parens = 0;
    while (!at_end()) {
      const char c = peek();
      if (is_space(c) || c == '{' || c == '}') break;
      if (c == ',' && parens == 0) break;
      if (c == '(') ++parens;
      if (c == ')') --parens;
      out += c;
      advance();
    }
    if (out.empty()) fail(line, col, std::string("unexpected character '") + peek() + "'");
    return make(Tok::word, line, col, out);
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

struct RawRule {
  std::string source;
  AccessModeSet modes;
  SourceLocation location;
};

struct RawProfile {
  std::string name;
  std::optional<std::string> attachment;
  std::vector<std::string> includes;
  std::vector<RawRule> rules;
  std::vector<RawRule> included_rules;
  std::vector<CapabilityRule> capabilities;
  std::vector<CapabilityRule> included_capabilities;
  std::vector<std::string> transitions;
  std::vector<RawProfile> hats;
  ProfileMode mode = ProfileMode::enforce;
  SourceLocation location;
};

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-' || c == '.' || c == ':' || c == '+';
}

bool is_profile_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_name_char);
}

class Parser {
 public:
  Parser(const IncludeResolver& resolver, const ParseOptions& options, ProfileSet& set)
      : resolver_(resolver), options_(options), set_(set) {}

  void parse_main(std::string_view text, const std::string& origin) {
    include_stack_.push_back(origin);
    parse_file_scope(text, origin, /*main=*/true);
    include_stack_.pop_back();
  }

  std::vector<RawProfile>& profiles() { return profiles_; }

 private:
  struct Cursor {
    std::vector<Token> tokens;
    std::string file;
    std::size_t i = 0;

    const Token& peek(std::size_t ahead = 0) const {
      return tokens[std::min(i + ahead, tokens.size() - 1)];
    }
    const Token& take() { return tokens[std::min(i++, tokens.size() - 1)]; }
  };

  [[noreturn]] void fail(const Cursor& c, const Token& t, const std::string& message) const {
    throw ParseError(c.file, t.line, t.column, message);
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::word:
      case Tok::path:
        return "'" + t.text + "'";
      case Tok::lbrace:
        return "'{'";
      case Tok::rbrace:
        return "'}'";
      case Tok::comma:
        return "','";
      case Tok::arrow:
        return "'->'";
      case Tok::equals:
        return "'='";
      case Tok::plus_equals:
        return "'+='";
      case Tok::include:
        return "'#include <" + t.text + ">'";
      case Tok::end:
        return "end of input";
    }
    return "token";
  }

  SourceLocation loc(const Cursor& c, const Token& t) const { return {c.file, t.line, t.column}; }

  std::optional<IncludeResolver::Resolved> resolve_include(const Cursor& c, const Token& t) {
    auto resolved = resolver_.resolve(t.text);
    if (!resolved) {
      if (options_.include_mode == IncludeMode::strict) {
        fail(c, t, "unresolved include <" + t.text + ">");
      }
      set_.unresolved().push_back({UnresolvedKind::include, current_profile_, t.text, loc(c, t)});
      return std::nullopt;
    }
    if (std::find(include_stack_.begin(), include_stack_.end(), resolved->path) !=
        include_stack_.end()) {
      fail(c, t, "include cycle through <" + t.text + ">");
    }
    return resolved;
  }

  void parse_file_scope(std::string_view text, const std::string& file, bool main) {
    Cursor c{Lexer(text, file).run(), file};
    while (c.peek().kind != Tok::end) {
      const Token& t = c.peek();
      if (t.kind == Tok::include) {
        c.take();
        if (main) set_.file_includes().push_back(t.text);
        if (auto resolved = resolve_include(c, t)) {
          include_stack_.push_back(resolved->path);
          parse_file_scope(resolved->text, resolved->path, false);
          include_stack_.pop_back();
        }
      } else if (t.kind == Tok::path && t.text.rfind("@{", 0) == 0 &&
                 (c.peek(1).kind == Tok::equals || c.peek(1).kind == Tok::plus_equals)) {
        parse_variable(c, main);
      } else if (t.kind == Tok::word && t.text == "profile") {
        parse_profile_header(c);
      } else if (t.kind == Tok::path && t.text.front() == '/') {
        parse_profile_header(c);
      } else if (t.kind == Tok::word && t.text.front() == '^') {
        fail(c, t, "hat " + describe(t) + " outside of a profile");
      } else {
        fail(c, t, "unexpected " + describe(t) + " at file scope");
      }
    }
  }

  void parse_variable(Cursor& c, bool main) {
    const Token name_tok = c.take();
    const Token op = c.take();
    const std::string name = name_tok.text.substr(2, name_tok.text.size() - 3);
    if (name_tok.text.back() != '}' || name.empty() ||
        !std::all_of(name.begin(), name.end(), [](char ch) {
          return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
        })) {
      fail(c, name_tok, "invalid variable name " + describe(name_tok));
    }
    std::vector<std::string> values;
    while ((c.peek().kind == Tok::path || c.peek().kind == Tok::word) &&
           c.peek().line == op.line) {
      values.push_back(c.take().text);
    }
    if (values.empty()) fail(c, op, "variable @{" + name + "} has no values");
    const bool append = op.kind == Tok::plus_equals;
    if (append) {
      set_.variables().append(name, values);
    } else {
      set_.variables().define(name, values);
    }
    if (main) set_.local_definitions().push_back({name, values, append});
  }

  std::optional<ProfileMode> parse_flags(const Cursor& c, const Token& t) const {
    const std::string& s = t.text;
    if (s.rfind("flags=(", 0) != 0 || s.back() != ')') fail(c, t, "malformed flags " + describe(t));
    std::optional<ProfileMode> mode;
    std::stringstream inner(s.substr(7, s.size() - 8));
    std::string flag;
    while (std::getline(inner, flag, ',')) {
      flag.erase(0, flag.find_first_not_of(' '));
      flag.erase(flag.find_last_not_of(' ') + 1);
      auto m = parse_profile_mode(flag);
      if (!m) fail(c, t, "unsupported profile flag '" + flag + "'");
      mode = m;
    }
    return mode;
  }

  void parse_profile_header(Cursor& c) {
    RawProfile p;
    const Token head = c.take();
    p.location = loc(c, head);
    if (head.kind == Tok::word) {
      const Token& name = c.peek();
      if (name.kind == Tok::word && is_profile_name(name.text)) {
        p.name = c.take().text;
      } else if (name.kind == Tok::path && name.text.front() == '/') {
        p.name = c.take().text;
        p.attachment = p.name;
      } else {
        fail(c, name, "expected profile name, found " + describe(name));
      }
      if (c.peek().kind == Tok::path && c.peek().text.front() == '/' && !p.attachment) {
        p.attachment = c.take().text;
      }
    } else {
      p.name = head.text;
      p.attachment = head.text;
    }
    if (c.peek().kind == Tok::word && c.peek().text.rfind("flags=", 0) == 0) {
      const Token flags = c.take();
      if (auto m = parse_flags(c, flags)) p.mode = *m;
    }
    if (c.peek().kind != Tok::lbrace) {
      fail(c, c.peek(), "expected '{' after profile " + p.name + ", found " + describe(c.peek()));
    }
    c.take();
    for (const auto& existing : profiles_) {
      if (existing.name == p.name) fail(c, head, "duplicate profile identity '" + p.name + "'");
    }
    current_profile_ = p.name;
    parse_body(c, p, /*is_hat=*/false, /*included=*/false);
    current_profile_.clear();
    profiles_.push_back(std::move(p));
  }

  // Parses profile body statements until '}' (or end of input for included
  // fragments).
  void parse_body(Cursor& c, RawProfile& p, bool is_hat, bool included) {
    for (;;) {
      const Token& t = c.peek();
      if (t.kind == Tok::end) {
        if (included) return;
        fail(c, t, "missing '}' closing profile " + p.name);
      }
      if (t.kind == Tok::rbrace) {
        if (included) fail(c, t, "unbalanced '}' in included file");
        c.take();
        return;
      }
      if (t.kind == Tok::include) {
        const Token inc = c.take();
        if (!included) p.includes.push_back(inc.text);
        if (auto resolved = resolve_include(c, inc)) {
          include_stack_.push_back(resolved->path);
          Cursor sub{Lexer(resolved->text, resolved->path).run(), resolved->path};
          parse_body(sub, p, is_hat, /*included=*/true);
          include_stack_.pop_back();
        }
        continue;
      }
      if (t.kind == Tok::word && t.text == "capability") {
        parse_capability(c, p, included);
        continue;
      }
      if (t.kind == Tok::word && t.text == "change_profile") {
        parse_change_profile(c, p);
        continue;
      }
      if (t.kind == Tok::word && (t.text.front() == '^' || t.text == "hat")) {
        parse_hat(c, p, is_hat);
        continue;
      }
      if (t.kind == Tok::path) {
        if (t.text.front() != '/' && t.text.rfind("@{", 0) != 0) {
          fail(c, t, "path must be absolute: " + describe(t));
        }
        parse_rule(c, p, included);
        continue;
      }
      fail(c, t, "unexpected " + describe(t) + " in profile " + p.name);
    }
  }

  void expect_comma(Cursor& c, const Token& last, const std::string& what) {
    if (c.peek().kind != Tok::comma) {
      throw ParseError(c.file, last.line, last.column + static_cast<int>(last.text.size()),
                       "missing ',' after " + what);
    }
    c.take();
  }

  void parse_capability(Cursor& c, RawProfile& p, bool included) {
    const Token kw = c.take();
    Token last = kw;
    int count = 0;
    while (c.peek().kind == Tok::word) {
      last = c.take();
      if (!is_valid_capability_name(last.text)) {
        fail(c, last, "invalid capability name " + describe(last));
      }
      (included ? p.included_capabilities : p.capabilities).push_back({last.text});
      ++count;
    }
    if (count == 0) fail(c, c.peek(), "capability rule without a name");
    expect_comma(c, last, "capability rule");
  }

  void parse_change_profile(Cursor& c, RawProfile& p) {
    const Token kw = c.take();
    if (c.peek().kind != Tok::arrow) fail(c, c.peek(), "expected '->' after change_profile");
    c.take();
    const Token& target = c.peek();
    if ((target.kind != Tok::word || !is_profile_name(target.text)) &&
        (target.kind != Tok::path || target.text.front() != '/')) {
      fail(c, target, "expected change_profile target, found " + describe(target));
    }
    const Token name = c.take();
    p.transitions.push_back(name.text);
    expect_comma(c, name, "change_profile rule");
  }

  void parse_hat(Cursor& c, RawProfile& p, bool is_hat) {
    const Token head = c.take();
    if (is_hat) fail(c, head, "nested hats are not allowed");
    std::string name = head.text == "hat" ? std::string() : head.text.substr(1);
    if (name.empty()) {
      if (c.peek().kind != Tok::word) fail(c, c.peek(), "expected hat name");
      name = c.take().text;
    }
    if (!is_profile_name(name)) fail(c, head, "invalid hat name '" + name + "'");
    for (const auto& h : p.hats) {
      if (h.name == name) fail(c, head, "duplicate hat '" + name + "' in profile " + p.name);
    }
    if (c.peek().kind != Tok::lbrace) fail(c, c.peek(), "expected '{' after hat " + name);
    c.take();
    RawProfile hat;
    hat.name = name;
    hat.location = loc(c, head);
    parse_body(c, hat, /*is_hat=*/true, /*included=*/false);
    p.hats.push_back(std::move(hat));
  }

  void parse_rule(Cursor& c, RawProfile& p, bool included) {
    const Token path = c.take();
    const Token& modes_tok = c.peek();
    if (modes_tok.kind != Tok::word || modes_tok.line != path.line) {
      throw ParseError(c.file, path.line, path.column,
                       "missing access modes for " + describe(path));
    }
    const Token modes = c.take();
    RawRule rule;
    rule.source = path.text;
    rule.location = loc(c, path);
    try {
      rule.modes = AccessModeSet::parse(modes.text);
    } catch (const ModeError& e) {
      throw ParseError(c.file, modes.line, modes.column + static_cast<int>(e.offset()), e.what());
    }
    expect_comma(c, modes, "rule " + path.text + " " + modes.text);
    (included ? p.included_rules : p.rules).push_back(std::move(rule));
  }

  const IncludeResolver& resolver_;
  const ParseOptions& options_;
  ProfileSet& set_;
  std::vector<RawProfile> profiles_;
  std::vector<std::string> include_stack_;
  std::string current_profile_;
};

FileRule compile_rule(const RawRule& raw, const VariableTable& vars) {
  try {
    return FileRule{PathPattern::compile(raw.source, vars), raw.modes, raw.location};
  } catch (const PatternError& e) {
    throw ParseError(raw.location.file, raw.location.line,
                     raw.location.column + static_cast<int>(e.offset()), e.what());
  }
}

Profile finish(const RawProfile& raw, const VariableTable& vars, ProfileMode mode) {
  Profile p;
  p.name = raw.name;
  p.attachment = raw.attachment;
  p.includes = raw.includes;
  p.capabilities = raw.capabilities;
  p.included_capabilities = raw.included_capabilities;
  p.transitions = raw.transitions;
  p.mode = mode;
  p.location = raw.location;
  for (const auto& r : raw.rules) p.rules.push_back(compile_rule(r, vars));
  for (const auto& r : raw.included_rules) p.included_rules.push_back(compile_rule(r, vars));
  for (const auto& h : raw.hats) p.hats.push_back(finish(h, vars, mode));
  return p;
}

bool needs_quotes(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string quote_if_needed(std::string_view s) {
  return needs_quotes(s) ? "\"" + std::string(s) + "\"" : std::string(s);
}

void write_body(std::ostringstream& out, const Profile& p, const std::string& indent) {
  bool any = false;
  auto gap = [&] {
    if (any) out << '\n';
    any = false;
  };
  for (const auto& inc : p.includes) {
    out << indent << "#include <" << inc << ">\n";
    any = true;
  }
  gap();
  for (const auto& cap : p.capabilities) {
    out << indent << "capability " << cap.name << ",\n";
    any = true;
  }
  gap();
  for (const auto& t : p.transitions) {
    out << indent << "change_profile -> " << quote_if_needed(t) << ",\n";
    any = true;
  }
  gap();
  for (const auto& r : p.rules) {
    out << indent << quote_if_needed(r.pattern.source()) << ' ' << r.modes.to_string() << ",\n";
    any = true;
  }
  for (const auto& hat : p.hats) {
    gap();
    out << indent << '^' << hat.name << " {\n";
    write_body(out, hat, indent + "  ");
    out << indent << "}\n";
    any = true;
  }
}

}  // namespace

ProfileSet parse_profiles(std::string_view text, std::string_view origin,
                          const IncludeResolver& resolver, const ParseOptions& options) {
  ProfileSet set;
  if (options.base_variables) set.variables() = *options.base_variables;
  Parser parser(resolver, options, set);
  parser.parse_main(text, std::string(origin));
  for (const auto& raw : parser.profiles()) {
    set.add(finish(raw, set.variables(), raw.mode));
  }
  set.refresh_unresolved();
  return set;
}

std::string serialize_profile(const Profile& p) {
  std::ostringstream out;
  if (p.is_path_attached()) {
    out << quote_if_needed(p.name);
  } else {
    out << "profile " << p.name;
    if (p.attachment) out << ' ' << quote_if_needed(*p.attachment);
  }
  if (p.mode != ProfileMode::enforce) out << " flags=(" << to_string(p.mode) << ")";
  out << " {\n";
  write_body(out, p, "  ");
  out << "}\n";
  return out.str();
}

std::string serialize_profile_set(const ProfileSet& set) {
  std::ostringstream out;
  for (const auto& inc : set.file_includes()) out << "#include <" << inc << ">\n";
  if (!set.file_includes().empty()) out << '\n';
  for (const auto& def : set.local_definitions()) {
    out << "@{" << def.name << "} " << (def.append ? "+=" : "=");
    for (const auto& v : def.values) out << ' ' << v;
    out << '\n';
  }
  if (!set.local_definitions().empty()) out << '\n';
  bool first = true;
  for (const auto& p : set.profiles()) {
    if (!first) out << '\n';
    first = false;
    out << serialize_profile(p);
  }
  return out.str();
}

std::vector<std::filesystem::path> profile_search_roots(
    const std::vector<std::filesystem::path>& explicit_roots, bool include_defaults) {
  std::vector<std::filesystem::path> roots = explicit_roots;
  if (const char* env = std::getenv("ARMORCAGE_PROFILE_PATH")) {
    std::stringstream ss(env);
    std::string item;
    while (std::getline(ss, item, ':')) {
      if (!item.empty()) roots.emplace_back(item);
    }
  }
  if (include_defaults) {
    std::error_code ec;
    for (const char* dir : {"profiles", ARMORCAGE_INSTALL_PROFILE_DIR, "/etc/apparmor.d"}) {
      if (std::filesystem::is_directory(dir, ec)) roots.emplace_back(dir);
    }
  }
  std::vector<std::filesystem::path> unique;
  std::set<std::string> seen;
  for (const auto& r : roots) {
    std::error_code ec;
    auto canon = std::filesystem::weakly_canonical(r, ec);
    const std::string key = ec ? r.string() : canon.string();
    if (seen.insert(key).second) unique.push_back(r);
  }
  return unique;
}

ProfileSet parse_profile_file(const std::filesystem::path& file,
                              const std::vector<std::filesystem::path>& roots,
                              IncludeMode include_mode) {
  auto text = read_file(file);
  if (!text) throw Error("cannot read profile file " + file.string());
  auto search = roots;
  search.push_back(file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
  DirectoryResolver resolver(search);
  ParseOptions options;
  options.include_mode = include_mode;
  return parse_profiles(*text, file.string(), resolver, options);
}

LibraryLoad load_profile_library(const std::vector<std::filesystem::path>& roots,
                                 IncludeMode include_mode) {
  LibraryLoad out;
  DirectoryResolver resolver(roots);
  ParseOptions options;
  options.include_mode = include_mode;
  for (const auto& root : roots) {
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
      if (!entry.is_regular_file()) continue;
      const auto name = entry.path().filename().string();
      if (name.empty() || name.front() == '.' || name.back() == '~' ||
          entry.path().extension() == ".md") {
        continue;
      }
      files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto text = read_file(file);
      if (!text) continue;
      try {
        auto set = parse_profiles(*text, file.string(), resolver, options);
        for (const auto& [name, values] : set.variables().bindings()) {
          if (!out.set.variables().contains(name)) out.set.variables().define(name, values);
        }
        for (auto& u : set.unresolved()) {
          if (u.kind == UnresolvedKind::include) out.set.unresolved().push_back(u);
        }
        for (const auto& p : set.profiles()) {
          if (!out.set.add_if_absent(p)) {
            out.diagnostics.push_back(file.string() + ": profile '" + p.name +
                                      "' shadowed by an earlier definition");
          }
        }
      } catch (const Error& e) {
        out.diagnostics.push_back(e.what());
      }
    }
  }
  out.set.refresh_unresolved();
  return out;
}

}  // namespace armorcage
