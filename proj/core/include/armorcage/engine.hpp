#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armorcage/access_mode.hpp"
#include "armorcage/audit_record.hpp"
#include "armorcage/error.hpp"
#include "armorcage/profile.hpp"

namespace armorcage {

// Secret used to leave a hat.
struct HatToken {
  std::uint64_t value = 0;

  friend bool operator==(const HatToken&, const HatToken&) = default;
};

struct SubjectContext {
  std::optional<std::string> profile;  // nullopt: unconfined
  std::optional<std::string> hat;
  std::optional<HatToken> token;
  bool poisoned = false;

  static SubjectContext unconfined() { return {}; }
  static SubjectContext confined(std::string profile_name) {
    SubjectContext ctx;
    ctx.profile = std::move(profile_name);
    return ctx;
  }

  bool is_unconfined() const { return !profile.has_value(); }
  // "r-base", "testprofile^testhat" or "unconfined".
  std::string label() const;

  friend bool operator==(const SubjectContext&, const SubjectContext&) = default;
};

struct AccessRequest {
  std::string path;  // normalized
  AccessModeSet requested;
  Operation operation = Operation::read;

  static AccessRequest read(std::string path);
  static AccessRequest write(std::string path);
  static AccessRequest mmap(std::string path);
  // Requests permission to execute; any exec mode granted satisfies it.
  static AccessRequest exec(std::string path);
  // Directory listing: read on the path with a trailing '/'.
  static AccessRequest list(std::string path);

  // Throws Error if the request breaks its invariants.
  void validate() const;
};

struct RuleRef {
  std::string profile;
  std::optional<std::string> hat;
  std::size_t index = 0;  // into own rules, or included rules when `included`
  bool included = false;
  std::string pattern;
  AccessModeSet modes;
};

struct Decision {
  bool allowed = false;
  bool effective = false;
  AccessModeSet granted;  // union over matched rules
  std::vector<RuleRef> matched;
  std::optional<AuditRecord> audit;  // emitted for every denial
};

enum class PolicyErrc {
  unknown_profile,
  unknown_hat,
  denied_transition,
  already_in_hat,
  no_active_hat,
  unconfined,
  poisoned,
  not_executable,
  no_attached_profile,
  conflicting_exec_modes,
  token_mismatch,
};

class PolicyError : public Error {
 public:
  PolicyError(PolicyErrc code, const std::string& message) : Error(message), code_(code) {}
  PolicyErrc code() const { return code_; }

 private:
  PolicyErrc code_;
};

// Raised by revert_hat on a wrong token. The context is already poisoned.
class SecurityViolation : public PolicyError {
 public:
  explicit SecurityViolation(const std::string& message)
      : PolicyError(PolicyErrc::token_mismatch, message) {}
};

// Union of modes across every matching rule; allowed iff the request is a
// subset of it. No matching rule means deny. For exec requests any granted
// exec mode satisfies the exec part.
Decision check_access(const SubjectContext& ctx, const ProfileSet& set,
                      const AccessRequest& req);

bool check_capability(const SubjectContext& ctx, const ProfileSet& set,
                      std::string_view capability);

struct ExecTransition {
  SubjectContext context;
  std::optional<ExecMode> mode;  // nullopt when nothing changes (unconfined)
  std::optional<std::string> warning;
};

// Context a process runs in after executing `exec_path`. Throws PolicyError.
ExecTransition exec_transition(const SubjectContext& ctx, const ProfileSet& set,
                               std::string_view exec_path);

// One-way move into `target`. Throws PolicyError.
SubjectContext change_profile(const SubjectContext& ctx, const ProfileSet& set,
                              std::string_view target);

// Enters a hat of the current profile. Throws PolicyError.
void change_hat(SubjectContext& ctx, const ProfileSet& set, std::string_view hat,
                HatToken token);

// Leaves the active hat. A wrong token poisons `ctx` and throws
// SecurityViolation.
void revert_hat(SubjectContext& ctx, HatToken token);

ProfileSet set_mode(const ProfileSet& set, std::string_view profile, ProfileMode mode);

}  // namespace armorcage
