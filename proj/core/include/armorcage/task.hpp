#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "armorcage/audit_record.hpp"
#include "armorcage/engine.hpp"
#include "armorcage/error.hpp"
#include "armorcage/profile.hpp"

namespace armorcage {

namespace step {
struct ReadFile {
  std::string path;
  friend bool operator==(const ReadFile&, const ReadFile&) = default;
};
struct WriteFile {
  std::string path;
  std::string bytes;
  friend bool operator==(const WriteFile&, const WriteFile&) = default;
};
struct ListDir {
  std::string path;
  friend bool operator==(const ListDir&, const ListDir&) = default;
};
struct Exec {
  std::string path;
  std::vector<std::string> args;
  friend bool operator==(const Exec&, const Exec&) = default;
};
struct AllocBytes {
  std::uint64_t bytes = 0;
  friend bool operator==(const AllocBytes&, const AllocBytes&) = default;
};
struct BurnCpu {
  double seconds = 0;
  friend bool operator==(const BurnCpu&, const BurnCpu&) = default;
};
// Self-replicating fork loop. Each process makes up to `budget` fork calls
// and every child inherits what is left, so a bounded run creates at most
// 2^budget - 1 descendants. nullopt means no bound.
struct ForkN {
  std::optional<std::uint32_t> budget;
  friend bool operator==(const ForkN&, const ForkN&) = default;
};
struct Sleep {
  double seconds = 0;
  friend bool operator==(const Sleep&, const Sleep&) = default;
};
struct ScanPattern {
  std::string root;
  std::string regex;
  std::uint64_t size_cap = 0;
  friend bool operator==(const ScanPattern&, const ScanPattern&) = default;
};
struct Emit {
  std::string bytes;
  friend bool operator==(const Emit&, const Emit&) = default;
};
}  // namespace step

using TaskStep = std::variant<step::ReadFile, step::WriteFile, step::ListDir, step::Exec,
                              step::AllocBytes, step::BurnCpu, step::ForkN, step::Sleep,
                              step::ScanPattern, step::Emit>;

class TaskError : public Error {
 public:
  TaskError(const std::string& message, int line = 0) : Error(message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct TaskScript {
  std::vector<TaskStep> steps;

  // Throws TaskError if the script is empty or a step's parameters are bad.
  void validate() const;

  friend bool operator==(const TaskScript&, const TaskScript&) = default;
};

// Line format, one step per line, '#' comments, double quotes for arguments
// with spaces:
//   read <path>            write <path> <hex>     list <path>
//   exec <path> [args...]  alloc <bytes>          burn <seconds>
//   forkn <count|unbounded> sleep <seconds>
//   scan <root> <regex> <size-cap>               emit <hex>
TaskScript parse_task_text(std::string_view text);
std::string to_task_text(const TaskScript& script);

// Structured form: {"steps": [{"op": "read", "path": "/etc/group"}, ...]}.
TaskScript parse_task_json(std::string_view text);
std::string to_task_json(const TaskScript& script);

// Picks the format from the first non-blank character.
TaskScript parse_task(std::string_view text);

// read_syslog, find_credit_cards, memtest, cputest, forkbomb.
TaskScript builtin_fixture(std::string_view name);
std::vector<std::string> builtin_fixture_names();

inline constexpr std::string_view kCreditCardRegex = "([0-9]{4}[- ]){3}[0-9]{4}";
inline constexpr std::uint64_t kCreditCardSizeCap = 1000000;
inline constexpr std::uint64_t kMemtestBytes = 80000000;  // 1e7 doubles

enum class RunMode {
  execute,   // touch the filesystem, allocate, burn, fork
  simulate,  // decisions only; reads stay read-only, nothing else happens
};

struct DecisionTrace {
  std::size_t step = 0;
  Operation operation = Operation::read;
  std::string path;
  AccessModeSet requested;
  bool allowed = false;
  bool effective = false;

  friend bool operator==(const DecisionTrace&, const DecisionTrace&) = default;
};

enum class TaskStatus { ok, denied, error };

struct TaskOutcome {
  TaskStatus status = TaskStatus::ok;
  std::string payload;
  std::string report;  // denial or error description
  std::vector<DecisionTrace> trace;
  std::vector<AuditRecord> audit;
  SubjectContext final_context;
};

struct RunOptions {
  RunMode mode = RunMode::execute;
  // Permit ForkN without a bound.
  bool allow_unbounded_fork = false;
  // Runs in every process created by ForkN right after fork().
  std::function<void()> on_fork_child;
  std::function<void(const AuditRecord&)> on_audit;
  std::function<void(const DecisionTrace&)> on_decision;
};

// Runs the steps in order, mediating every file and exec step through the
// policy engine. Denials in enforce mode stop the script.
TaskOutcome run_task(const TaskScript& script, const SubjectContext& ctx,
                     const ProfileSet& set, const RunOptions& options = {});

struct ScanMatch {
  std::string path;
  std::string match;

  friend bool operator==(const ScanMatch&, const ScanMatch&) = default;
};

// Thrown by scan_pattern when the walk hits a denied path.
class AccessDenied : public Error {
 public:
  AccessDenied(const std::string& message, DecisionTrace trace)
      : Error(message), trace_(std::move(trace)) {}
  const DecisionTrace& trace() const { return trace_; }

 private:
  DecisionTrace trace_;
};

// Recursive, sorted walk from `root`; every directory visit needs list access
// and every file read access. Files larger than `size_cap` bytes are skipped.
// Regex matches are collected per line.
std::vector<ScanMatch> scan_pattern(std::string_view root, std::string_view regex,
                                    std::uint64_t size_cap, const SubjectContext& ctx,
                                    const ProfileSet& set);

// Replaces a leading '~' with the effective user's home, then normalizes.
std::string expand_task_path(std::string_view path);

}  // namespace armorcage
