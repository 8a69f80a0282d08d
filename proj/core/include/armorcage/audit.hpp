#pragma once

#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armorcage/audit_record.hpp"
#include "armorcage/profile.hpp"

namespace armorcage {

// Audit log line: timestamp, profile, hat ("-" if none), operation, path,
// requested modes, decision, effective decision. Tab separated, no trailing
// tab, terminated by '\n'. Tabs, newlines and backslashes in paths are
// escaped as \t, \n and \\.
std::string format_record(const AuditRecord& record);

std::string format_timestamp(std::chrono::system_clock::time_point when);

// Append-only record sink. Each record is written with a single write(2)
// under a mutex, so concurrent writers never interleave within a line.
class AuditSink {
 public:
  // Opens (creating if needed) `path` in append mode. Throws Error.
  static AuditSink open(const std::string& path);
  static AuditSink standard_error();
  // --audit-log flag value, else ARMORCAGE_AUDIT_LOG, else standard error.
  static AuditSink from_environment(const std::optional<std::string>& flag);

  AuditSink(AuditSink&& other) noexcept;
  AuditSink& operator=(AuditSink&& other) noexcept;
  AuditSink(const AuditSink&) = delete;
  AuditSink& operator=(const AuditSink&) = delete;
  ~AuditSink();

  // Stamps an empty timestamp with the current time. Throws Error on I/O
  // failure.
  void append(const AuditRecord& record);
  const std::string& description() const { return description_; }

 private:
  AuditSink(int fd, bool owned, std::string description);

  int fd_ = -1;
  bool owned_ = false;
  std::string description_;
  std::unique_ptr<std::mutex> mutex_;
};

inline void append_record(AuditSink& sink, const AuditRecord& record) {
  sink.append(record);
}

struct LogDiagnostic {
  int line = 0;
  std::string message;
};

struct ParsedLog {
  std::vector<AuditRecord> records;
  std::vector<LogDiagnostic> diagnostics;
};

// Inverse of format_record over a whole log. Malformed lines become
// diagnostics and parsing continues.
ParsedLog parse_log(std::string_view text);
// Parses one line (without the newline). Throws Error.
AuditRecord parse_record(std::string_view line);

struct RuleSuggestion {
  std::string profile;
  std::optional<std::string> hat;
  FileRule rule;
  std::size_t evidence = 0;
};

struct SuggestOptions {
  // Collapse three or more sibling file suggestions into "dir/* modes".
  bool generalize = false;
  std::size_t generalize_threshold = 3;
};

// Groups denials by (profile, hat, path) and proposes one exact-path rule per
// group holding the modes still missing from `set`. Sorted by evidence
// descending, then path.
std::vector<RuleSuggestion> suggest_rules(const std::vector<AuditRecord>& records,
                                          const ProfileSet& set,
                                          const SuggestOptions& options = {});

// Appends each suggested rule to its profile (or hat). Throws PolicyError for
// unknown profiles.
ProfileSet apply_suggestions(const ProfileSet& set,
                             const std::vector<RuleSuggestion>& suggestions);

// "  /etc/passwd r,"-style rendering grouped under "profile NAME {" headers.
std::string format_suggestions(const std::vector<RuleSuggestion>& suggestions);

}  // namespace armorcage
