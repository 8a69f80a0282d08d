#include "armorcage/audit.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <map>
#include <tuple>
#include <utility>

#include "armorcage/engine.hpp"
#include "armorcage/path.hpp"

namespace armorcage {

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\\':
        out += "\\\\";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw Error("dangling escape in path field");
    switch (s[i]) {
      case 't':
        out += '\t';
        break;
      case 'n':
        out += '\n';
        break;
      case '\\':
        out += '\\';
        break;
      default:
        throw Error(std::string("unknown escape \\") + s[i] + " in path field");
    }
  }
  return out;
}

std::string_view verdict(bool allowed) { return allowed ? "allowed" : "denied"; }

bool parse_verdict(std::string_view s, const char* field) {
  if (s == "allowed") return true;
  if (s == "denied") return false;
  throw Error(std::string("bad ") + field + " field '" + std::string(s) + "'");
}

}  // namespace

std::string format_timestamp(std::chrono::system_clock::time_point when) {
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(when.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(micros / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  const std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char frac[16];
  std::snprintf(frac, sizeof frac, ".%06lldZ", static_cast<long long>(micros % 1000000));
  return std::string(buf, n) + frac;
}

std::string format_record(const AuditRecord& r) {
  std::string line;
  line += r.timestamp.empty() ? "-" : r.timestamp;
  line += '\t';
  line += r.profile;
  line += '\t';
  line += r.hat ? *r.hat : "-";
  line += '\t';
  line += to_string(r.operation);
  line += '\t';
  line += escape_field(r.path);
  line += '\t';
  line += r.requested.to_string();
  line += '\t';
  line += verdict(r.allowed);
  line += '\t';
  line += verdict(r.effective);
  line += '\n';
  return line;
}

AuditRecord parse_record(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 8) {
    throw Error("expected 8 tab-separated fields, found " + std::to_string(fields.size()));
  }
  AuditRecord r;
  r.timestamp = fields[0] == "-" ? "" : std::string(fields[0]);
  if (fields[1].empty()) throw Error("empty profile field");
  r.profile = std::string(fields[1]);
  if (fields[2].empty()) throw Error("empty hat field");
  if (fields[2] != "-") r.hat = std::string(fields[2]);
  const auto op = parse_operation(fields[3]);
  if (!op) throw Error("unknown operation '" + std::string(fields[3]) + "'");
  r.operation = *op;
  r.path = unescape_field(fields[4]);
  if (r.path.empty() || r.path.front() != '/') throw Error("path field is not absolute");
  try {
    r.requested = AccessModeSet::parse(fields[5]);
  } catch (const ModeError& e) {
    throw Error(std::string("bad modes field: ") + e.what());
  }
  if (r.requested.empty()) throw Error("empty modes field");
  r.allowed = parse_verdict(fields[6], "decision");
  r.effective = parse_verdict(fields[7], "effective");
  return r;
}

ParsedLog parse_log(std::string_view text) {
  ParsedLog out;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      out.records.push_back(parse_record(line));
    } catch (const Error& e) {
      out.diagnostics.push_back({line_no, e.what()});
    }
  }
  return out;
}

AuditSink::AuditSink(int fd, bool owned, std::string description)
    : fd_(fd), owned_(owned), description_(std::move(description)),
      mutex_(std::make_unique<std::mutex>()) {}

AuditSink::AuditSink(AuditSink&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      owned_(std::exchange(other.owned_, false)),
      description_(std::move(other.description_)),
      mutex_(std::move(other.mutex_)) {}

AuditSink& AuditSink::operator=(AuditSink&& other) noexcept {
  if (this != &other) {
    if (owned_ && fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    owned_ = std::exchange(other.owned_, false);
    description_ = std::move(other.description_);
    mutex_ = std::move(other.mutex_);
  }
  return *this;
}

AuditSink::~AuditSink() {
  if (owned_ && fd_ >= 0) ::close(fd_);
}

AuditSink AuditSink::open(const std::string& path) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open audit log " + path + ": " + std::strerror(errno));
  return AuditSink(fd, true, path);
}

AuditSink AuditSink::standard_error() { return AuditSink(STDERR_FILENO, false, "<stderr>"); }

AuditSink AuditSink::from_environment(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return open(*flag);
  if (const char* env = std::getenv("ARMORCAGE_AUDIT_LOG"); env && *env) return open(env);
  return standard_error();
}

void AuditSink::append(const AuditRecord& record) {
  std::string line;
  if (record.timestamp.empty()) {
    AuditRecord stamped = record;
    stamped.timestamp = format_timestamp(std::chrono::system_clock::now());
    line = format_record(stamped);
  } else {
    line = format_record(record);
  }
  std::lock_guard lock(*mutex_);
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("audit write to " + description_ + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

namespace {

using GroupKey = std::tuple<std::string, std::optional<std::string>, std::string>;

struct Group {
  AccessModeSet requested;
  bool exec = false;
  std::size_t evidence = 0;
};

const Profile* active_profile(const ProfileSet& set, const std::string& profile,
                              const std::optional<std::string>& hat) {
  const Profile* p = set.find(profile);
  if (!p || !hat) return p;
  return p->find_hat(*hat);
}

AccessModeSet granted_for(const Profile& p, std::string_view path) {
  AccessModeSet u;
  for (const auto* rule : p.effective_rules()) {
    if (rule->pattern.matches(path)) u |= rule->modes;
  }
  return u;
}

AccessModeSet pick_exec(AccessModeSet requested_exec) {
  if (requested_exec.has(AccessModeSet::kInheritExec)) {
    return AccessModeSet(AccessModeSet::kInheritExec);
  }
  for (auto flag : {AccessModeSet::kDiscreteExec, AccessModeSet::kChildExec,
                    AccessModeSet::kUnconfinedExec}) {
    if (requested_exec.has(flag)) return AccessModeSet(flag);
  }
  return {};
}

std::string parent_directory(std::string_view path) {
  const auto slash = path.find_last_of('/');
  return std::string(path.substr(0, slash + 1));
}

}  // namespace

std::vector<RuleSuggestion> suggest_rules(const std::vector<AuditRecord>& records,
                                          const ProfileSet& set, const SuggestOptions& options) {
  std::map<GroupKey, Group> groups;
  for (const auto& r : records) {
    if (r.allowed) continue;
    auto& g = groups[{r.profile, r.hat, r.path}];
    g.requested |= r.requested;
    g.exec = g.exec || r.operation == Operation::exec;
    ++g.evidence;
  }

  struct Pending {
    std::string profile;
    std::optional<std::string> hat;
    std::string path;
    AccessModeSet modes;
    std::size_t evidence;
  };
  std::vector<Pending> pending;
  for (const auto& [key, g] : groups) {
    const auto& [profile, hat, path] = key;
    const Profile* p = active_profile(set, profile, hat);
    if (!p) continue;
    const AccessModeSet granted = granted_for(*p, path);
    AccessModeSet missing = g.requested.without_exec() - granted;
    if (g.requested.has_exec() && !granted.has_exec()) missing |= pick_exec(g.requested.exec_part());
    if (missing.empty()) continue;
    pending.push_back({profile, hat, path, missing, g.evidence});
  }

  if (options.generalize) {
    std::map<std::tuple<std::string, std::optional<std::string>, std::string>, std::vector<std::size_t>>
        siblings;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto& s = pending[i];
      if (is_directory_path(s.path)) continue;
      siblings[{s.profile, s.hat, parent_directory(s.path)}].push_back(i);
    }
    std::vector<bool> drop(pending.size(), false);
    std::vector<Pending> merged;
    for (const auto& [key, members] : siblings) {
      if (members.size() < std::max<std::size_t>(options.generalize_threshold, 2)) continue;
      const auto exec = pending[members.front()].modes.exec_part();
      const bool uniform = std::all_of(members.begin(), members.end(), [&](std::size_t i) {
        return pending[i].modes.exec_part() == exec;
      });
      if (!uniform) continue;
      Pending m{std::get<0>(key), std::get<1>(key), std::get<2>(key), {}, 0};
      for (const auto i : members) {
        m.modes |= pending[i].modes;
        m.evidence += pending[i].evidence;
        drop[i] = true;
      }
      merged.push_back(std::move(m));
    }
    std::vector<Pending> kept;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (!drop[i]) kept.push_back(std::move(pending[i]));
    }
    for (auto& m : merged) {
      m.path = escape_glob(m.path) + "*";
      kept.push_back(std::move(m));
    }
    pending = std::move(kept);
  } else {
    for (auto& s : pending) s.path = escape_glob(s.path);
  }
  std::vector<RuleSuggestion> out;
  for (auto& s : pending) {
    out.push_back({s.profile, s.hat,
                   FileRule{PathPattern::compile(s.path, set.variables()), s.modes, {}},
                   s.evidence});
  }
  std::stable_sort(out.begin(), out.end(), [](const RuleSuggestion& a, const RuleSuggestion& b) {
    if (a.evidence != b.evidence) return a.evidence > b.evidence;
    if (a.rule.pattern.source() != b.rule.pattern.source()) {
      return a.rule.pattern.source() < b.rule.pattern.source();
    }
    return std::tie(a.profile, a.hat) < std::tie(b.profile, b.hat);
  });
  return out;
}

ProfileSet apply_suggestions(const ProfileSet& set,
                             const std::vector<RuleSuggestion>& suggestions) {
  ProfileSet out = set;
  for (const auto& s : suggestions) {
    Profile* p = out.find_mutable(s.profile);
    if (!p) throw PolicyError(PolicyErrc::unknown_profile, "unknown profile '" + s.profile + "'");
    if (s.hat) {
      auto it = std::find_if(p->hats.begin(), p->hats.end(),
                             [&](const Profile& h) { return h.name == *s.hat; });
      if (it == p->hats.end()) {
        throw PolicyError(PolicyErrc::unknown_hat,
                          "no hat '" + *s.hat + "' in profile " + s.profile);
      }
      p = &*it;
    }
    p->rules.push_back(s.rule);
  }
  return out;
}

std::string format_suggestions(const std::vector<RuleSuggestion>& suggestions) {
  std::vector<std::pair<std::string, std::vector<const RuleSuggestion*>>> blocks;
  for (const auto& s : suggestions) {
    const std::string label = s.hat ? s.profile + "^" + *s.hat : s.profile;
    auto it = std::find_if(blocks.begin(), blocks.end(),
                           [&](const auto& b) { return b.first == label; });
    if (it == blocks.end()) {
      blocks.push_back({label, {}});
      it = std::prev(blocks.end());
    }
    it->second.push_back(&s);
  }
  std::string out;
  for (const auto& [label, items] : blocks) {
    out += "profile " + label + " {\n";
    for (const auto* s : items) {
      out += "  " + s->rule.pattern.source() + " " + s->rule.modes.to_string() + ",  # " +
             std::to_string(s->evidence) + (s->evidence == 1 ? " record\n" : " records\n");
    }
    out += "}\n";
  }
  return out;
}

}  // namespace armorcage
