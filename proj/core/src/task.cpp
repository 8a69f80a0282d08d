#include "armorcage/task.hpp"

#include <charconv>
#include <cmath>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "armorcage/path.hpp"

namespace armorcage {

namespace {

using json = nlohmann::json;

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const unsigned char c : bytes) {
    out += kDigits[c >> 4];
    out += kDigits[c & 0xf];
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string from_hex(std::string_view hex, int line) {
  if (hex.size() % 2 != 0) throw TaskError("odd-length hex string", line);
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_digit(hex[i]), lo = hex_digit(hex[i + 1]);
    if (hi < 0 || lo < 0) throw TaskError("invalid hex string '" + std::string(hex) + "'", line);
    out += static_cast<char>(hi * 16 + lo);
  }
  return out;
}

std::string format_seconds(double s) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, s);
  return std::string(buf, ptr);
}

double parse_seconds(std::string_view text, int line) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw TaskError("invalid number of seconds '" + std::string(text) + "'", line);
  }
  return value;
}

std::uint64_t parse_count(std::string_view text, int line) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw TaskError("invalid count '" + std::string(text) + "'", line);
  }
  return value;
}

std::vector<std::string> split_args(std::string_view line, int line_no) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::string arg;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '\\' && i + 1 < line.size()) {
          arg += line[i + 1];
          i += 2;
        } else if (line[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          arg += line[i++];
        }
      }
      if (!closed) throw TaskError("unterminated quoted argument", line_no);
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
        arg += line[i++];
      }
    }
    out.push_back(std::move(arg));
  }
  return out;
}

std::string quote_arg(std::string_view arg) {
  const bool plain = !arg.empty() && arg.find_first_of(" \t\r\"\\#") == std::string_view::npos;
  if (plain) return std::string(arg);
  std::string out = "\"";
  for (const char c : arg) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

void expect_args(const std::vector<std::string>& args, std::size_t min, std::size_t max,
                 int line) {
  if (args.size() - 1 < min || args.size() - 1 > max) {
    throw TaskError("wrong number of arguments for '" + args[0] + "'", line);
  }
}

TaskStep parse_step(const std::vector<std::string>& a, int line) {
  const std::string& op = a[0];
  if (op == "read") {
    expect_args(a, 1, 1, line);
    return step::ReadFile{a[1]};
  }
  if (op == "write") {
    expect_args(a, 2, 2, line);
    return step::WriteFile{a[1], from_hex(a[2], line)};
  }
  if (op == "list") {
    expect_args(a, 1, 1, line);
    return step::ListDir{a[1]};
  }
  if (op == "exec") {
    expect_args(a, 1, SIZE_MAX, line);
    return step::Exec{a[1], std::vector<std::string>(a.begin() + 2, a.end())};
  }
  if (op == "alloc") {
    expect_args(a, 1, 1, line);
    return step::AllocBytes{parse_count(a[1], line)};
  }
  if (op == "burn") {
    expect_args(a, 1, 1, line);
    return step::BurnCpu{parse_seconds(a[1], line)};
  }
  if (op == "forkn") {
    expect_args(a, 1, 1, line);
    if (a[1] == "unbounded") return step::ForkN{};
    const auto n = parse_count(a[1], line);
    if (n > UINT32_MAX) throw TaskError("fork count too large", line);
    return step::ForkN{static_cast<std::uint32_t>(n)};
  }
  if (op == "sleep") {
    expect_args(a, 1, 1, line);
    return step::Sleep{parse_seconds(a[1], line)};
  }
  if (op == "scan") {
    expect_args(a, 3, 3, line);
    return step::ScanPattern{a[1], a[2], parse_count(a[3], line)};
  }
  if (op == "emit") {
    expect_args(a, 1, 1, line);
    return step::Emit{from_hex(a[1], line)};
  }
  throw TaskError("unknown step '" + op + "'", line);
}

void validate_path(const std::string& path, std::size_t index) {
  try {
    expand_task_path(path);
  } catch (const Error& e) {
    throw TaskError("step " + std::to_string(index) + ": " + e.what());
  }
}

void validate_seconds(double s, std::size_t index) {
  if (!(s > 0) || !std::isfinite(s)) {
    throw TaskError("step " + std::to_string(index) + ": seconds must be positive");
  }
}

}  // namespace

void TaskScript::validate() const {
  if (steps.empty()) throw TaskError("task script has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          const std::string where = "step " + std::to_string(i) + ": ";
          if constexpr (std::is_same_v<T, step::ReadFile> || std::is_same_v<T, step::WriteFile> ||
                        std::is_same_v<T, step::ListDir> || std::is_same_v<T, step::Exec>) {
            validate_path(s.path, i);
          } else if constexpr (std::is_same_v<T, step::AllocBytes>) {
            if (s.bytes == 0) throw TaskError(where + "alloc needs a positive byte count");
          } else if constexpr (std::is_same_v<T, step::BurnCpu> || std::is_same_v<T, step::Sleep>) {
            validate_seconds(s.seconds, i);
          } else if constexpr (std::is_same_v<T, step::ForkN>) {
            if (s.budget && *s.budget == 0) throw TaskError(where + "forkn needs a positive count");
          } else if constexpr (std::is_same_v<T, step::ScanPattern>) {
            validate_path(s.root, i);
            if (s.size_cap == 0) throw TaskError(where + "scan needs a positive size cap");
            try {
              std::regex re(s.regex);
            } catch (const std::regex_error& e) {
              throw TaskError(where + "bad regex '" + s.regex + "': " + e.what());
            }
          }
        },
        steps[i]);
  }
}

TaskScript parse_task_text(std::string_view text) {
  TaskScript script;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto args = split_args(text.substr(start, end - start), line_no);
    if (!args.empty()) script.steps.push_back(parse_step(args, line_no));
    start = end + 1;
  }
  script.validate();
  return script;
}

std::string to_task_text(const TaskScript& script) {
  std::ostringstream out;
  for (const auto& s : script.steps) {
    std::visit(
        [&](const auto& st) {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, step::ReadFile>) {
            out << "read " << quote_arg(st.path);
          } else if constexpr (std::is_same_v<T, step::WriteFile>) {
            out << "write " << quote_arg(st.path) << ' ' << quote_arg(to_hex(st.bytes));
          } else if constexpr (std::is_same_v<T, step::ListDir>) {
            out << "list " << quote_arg(st.path);
          } else if constexpr (std::is_same_v<T, step::Exec>) {
            out << "exec " << quote_arg(st.path);
            for (const auto& a : st.args) out << ' ' << quote_arg(a);
          } else if constexpr (std::is_same_v<T, step::AllocBytes>) {
            out << "alloc " << st.bytes;
          } else if constexpr (std::is_same_v<T, step::BurnCpu>) {
            out << "burn " << format_seconds(st.seconds);
          } else if constexpr (std::is_same_v<T, step::ForkN>) {
            out << "forkn " << (st.budget ? std::to_string(*st.budget) : "unbounded");
          } else if constexpr (std::is_same_v<T, step::Sleep>) {
            out << "sleep " << format_seconds(st.seconds);
          } else if constexpr (std::is_same_v<T, step::ScanPattern>) {
            out << "scan " << quote_arg(st.root) << ' ' << quote_arg(st.regex) << ' '
                << st.size_cap;
          } else if constexpr (std::is_same_v<T, step::Emit>) {
            out << "emit " << quote_arg(to_hex(st.bytes));
          }
        },
        s);
    out << '\n';
  }
  return out.str();
}

namespace {

template <typename T>
T field(const json& j, const char* key, std::size_t index) {
  if (!j.contains(key)) {
    throw TaskError("step " + std::to_string(index) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw TaskError("step " + std::to_string(index) + ": bad field '" + key + "'");
  }
}

}  // namespace

TaskScript parse_task_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw TaskError(std::string("invalid task JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("steps") || !doc["steps"].is_array()) {
    throw TaskError("task JSON needs a \"steps\" array");
  }
  TaskScript script;
  std::size_t i = 0;
  for (const auto& j : doc["steps"]) {
    if (!j.is_object()) throw TaskError("step " + std::to_string(i) + ": not an object");
    const auto op = field<std::string>(j, "op", i);
    if (op == "read") {
      script.steps.push_back(step::ReadFile{field<std::string>(j, "path", i)});
    } else if (op == "write") {
      script.steps.push_back(
          step::WriteFile{field<std::string>(j, "path", i), from_hex(field<std::string>(j, "hex", i), 0)});
    } else if (op == "list") {
      script.steps.push_back(step::ListDir{field<std::string>(j, "path", i)});
    } else if (op == "exec") {
      std::vector<std::string> args;
      if (j.contains("args")) args = field<std::vector<std::string>>(j, "args", i);
      script.steps.push_back(step::Exec{field<std::string>(j, "path", i), std::move(args)});
    } else if (op == "alloc") {
      script.steps.push_back(step::AllocBytes{field<std::uint64_t>(j, "bytes", i)});
    } else if (op == "burn") {
      script.steps.push_back(step::BurnCpu{field<double>(j, "seconds", i)});
    } else if (op == "forkn") {
      const auto& c = j.contains("count") ? j["count"] : json();
      if (c.is_string() && c.get<std::string>() == "unbounded") {
        script.steps.push_back(step::ForkN{});
      } else {
        const auto n = field<std::uint64_t>(j, "count", i);
        if (n > UINT32_MAX) throw TaskError("step " + std::to_string(i) + ": fork count too large");
        script.steps.push_back(step::ForkN{static_cast<std::uint32_t>(n)});
      }
    } else if (op == "sleep") {
      script.steps.push_back(step::Sleep{field<double>(j, "seconds", i)});
    } else if (op == "scan") {
      script.steps.push_back(step::ScanPattern{field<std::string>(j, "root", i),
                                               field<std::string>(j, "regex", i),
                                               field<std::uint64_t>(j, "size_cap", i)});
    } else if (op == "emit") {
      script.steps.push_back(step::Emit{from_hex(field<std::string>(j, "hex", i), 0)});
    } else {
      throw TaskError("step " + std::to_string(i) + ": unknown op '" + op + "'");
    }
    ++i;
  }
  script.validate();
  return script;
}

std::string to_task_json(const TaskScript& script) {
  json steps = json::array();
  for (const auto& s : script.steps) {
    std::visit(
        [&](const auto& st) {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, step::ReadFile>) {
            steps.push_back({{"op", "read"}, {"path", st.path}});
          } else if constexpr (std::is_same_v<T, step::WriteFile>) {
            steps.push_back({{"op", "write"}, {"path", st.path}, {"hex", to_hex(st.bytes)}});
          } else if constexpr (std::is_same_v<T, step::ListDir>) {
            steps.push_back({{"op", "list"}, {"path", st.path}});
          } else if constexpr (std::is_same_v<T, step::Exec>) {
            steps.push_back({{"op", "exec"}, {"path", st.path}, {"args", st.args}});
          } else if constexpr (std::is_same_v<T, step::AllocBytes>) {
            steps.push_back({{"op", "alloc"}, {"bytes", st.bytes}});
          } else if constexpr (std::is_same_v<T, step::BurnCpu>) {
            steps.push_back({{"op", "burn"}, {"seconds", st.seconds}});
          } else if constexpr (std::is_same_v<T, step::ForkN>) {
            steps.push_back({{"op", "forkn"},
                             {"count", st.budget ? json(*st.budget) : json("unbounded")}});
          } else if constexpr (std::is_same_v<T, step::Sleep>) {
            steps.push_back({{"op", "sleep"}, {"seconds", st.seconds}});
          } else if constexpr (std::is_same_v<T, step::ScanPattern>) {
            steps.push_back({{"op", "scan"},
                             {"root", st.root},
                             {"regex", st.regex},
                             {"size_cap", st.size_cap}});
          } else if constexpr (std::is_same_v<T, step::Emit>) {
            steps.push_back({{"op", "emit"}, {"hex", to_hex(st.bytes)}});
          }
        },
        s);
  }
  return json{{"steps", steps}}.dump(2) + "\n";
}

TaskScript parse_task(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') return parse_task_json(text);
  return parse_task_text(text);
}

TaskScript builtin_fixture(std::string_view name) {
  TaskScript s;
  if (name == "read_syslog") {
    s.steps.push_back(step::ReadFile{"/var/log/syslog"});
  } else if (name == "find_credit_cards") {
    s.steps.push_back(
        step::ScanPattern{"~/Documents", std::string(kCreditCardRegex), kCreditCardSizeCap});
  } else if (name == "memtest") {
    s.steps.push_back(step::AllocBytes{kMemtestBytes});
  } else if (name == "cputest") {
    s.steps.push_back(step::BurnCpu{30});
  } else if (name == "forkbomb") {
    s.steps.push_back(step::ForkN{});
  } else {
    throw TaskError("unknown fixture '" + std::string(name) + "'");
  }
  return s;
}

std::vector<std::string> builtin_fixture_names() {
  return {"read_syslog", "find_credit_cards", "memtest", "cputest", "forkbomb"};
}

}  // namespace armorcage
