#pragma once

#include <sys/types.h>

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "armorcage/audit_record.hpp"
#include "armorcage/error.hpp"
#include "armorcage/limits.hpp"
#include "armorcage/profile.hpp"
#include "armorcage/task.hpp"

namespace armorcage {

struct SandboxSpec {
  std::optional<Identity> identity;
  std::optional<int> priority;
  std::map<RlimitKind, RlimitValue> rlimits;
  std::optional<std::string> profile;
  std::optional<double> timeout;  // seconds
  std::optional<std::string> workdir;

  // Throws Error when the spec is inconsistent with itself or with `set`.
  void validate(const ProfileSet& set) const;
};

struct ExecCommand {
  std::vector<std::string> argv;
};

using Job = std::variant<TaskScript, ExecCommand>;

enum class EvalStatus { ok, timeout, limit_killed, denied, task_error, setup_error };

std::string_view to_string(EvalStatus status);
std::optional<EvalStatus> parse_eval_status(std::string_view text);

struct ResourceUsage {
  double cpu_seconds = 0;  // user + system
  std::uint64_t max_rss_bytes = 0;

  friend bool operator==(const ResourceUsage&, const ResourceUsage&) = default;
};

struct EvalResult {
  EvalStatus status = EvalStatus::setup_error;
  std::optional<int> signal;     // terminating signal, if any
  std::optional<int> exit_code;  // child exit status, if it exited
  std::string payload;
  std::string message;  // error frame text: setup step, denial or task error
  ResourceUsage usage;
  double duration = 0;  // wall seconds
  std::vector<AuditRecord> audit;
  std::vector<DecisionTrace> decisions;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

std::string signal_name(int signal);  // "SIGXCPU"
std::optional<int> parse_signal_name(std::string_view name);

enum class Backend {
  automatic,
  native,     // kernel MAC: profile entry writes the change-profile attribute
  simulated,  // profiles enforced only for task scripts, via the engine
};

std::string_view to_string(Backend backend);
std::optional<Backend> parse_backend(std::string_view text);
// Native when the kernel exposes the AppArmor interface, else simulated.
Backend detect_backend();

// Child exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSetupFailure = 64;
inline constexpr int kExitDenied = 65;
inline constexpr int kExitTaskError = 66;

struct SupervisorOptions {
  Backend backend = Backend::automatic;
  double kill_grace = 0.5;  // seconds between SIGTERM and SIGKILL
  bool allow_unbounded_fork = false;
};

struct SupervisorStats {
  std::uint64_t spawned = 0;
  std::uint64_t reaped_children = 0;
  std::uint64_t reaped_descendants = 0;
};

// Runs jobs in forked children. Every child leads its own process group;
// the supervisor registers as child subreaper so orphaned descendants come
// back to it and are collected. Thread safe.
class Supervisor {
 public:
  explicit Supervisor(ProfileSet set, SupervisorOptions options = {});

  EvalResult secure_eval(const Job& job, const SandboxSpec& spec);

  // Kills and collects whatever is left in groups this supervisor started.
  // Returns the number of processes collected.
  std::size_t reap();

  Backend backend() const { return backend_; }
  const ProfileSet& profiles() const { return set_; }
  SupervisorStats stats() const;

 private:
  std::size_t drain_group(pid_t pgid, bool block);

  ProfileSet set_;
  SupervisorOptions options_;
  Backend backend_;
  mutable std::mutex mutex_;
  std::vector<pid_t> live_groups_;
  std::size_t in_flight_ = 0;
  SupervisorStats stats_;
};

EvalResult secure_eval(const Job& job, const SandboxSpec& spec, const ProfileSet& set,
                       SupervisorOptions options = {});

// Framing used on the child channels: 8-byte little-endian length, then the
// bytes.
std::string encode_frame(std::string_view body);
// Decodes consecutive frames. Returns false if trailing bytes do not form a
// complete frame.
bool decode_frames(std::string_view data, std::vector<std::string>& frames);

}  // namespace armorcage
