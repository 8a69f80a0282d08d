#pragma once

#include <sys/types.h>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "armorcage/error.hpp"

namespace armorcage {

enum class RlimitKind {
  as,
  core,
  cpu,
  data,
  fsize,
  memlock,
  msgqueue,
  nice,
  nofile,
  nproc,
  rtprio,
  rttime,
  sigpending,
  stack,
};

inline constexpr std::array<RlimitKind, 14> kAllRlimitKinds = {
    RlimitKind::as,      RlimitKind::core,     RlimitKind::cpu,    RlimitKind::data,
    RlimitKind::fsize,   RlimitKind::memlock,  RlimitKind::msgqueue, RlimitKind::nice,
    RlimitKind::nofile,  RlimitKind::nproc,    RlimitKind::rtprio, RlimitKind::rttime,
    RlimitKind::sigpending, RlimitKind::stack,
};

enum class RlimitUnit { bytes, seconds, microseconds, count, priority_ceiling };

std::string_view to_string(RlimitKind kind);  // "AS", "NPROC", ...
std::string_view to_string(RlimitUnit unit);
RlimitUnit unit_of(RlimitKind kind);
int native_resource(RlimitKind kind);  // RLIMIT_* constant
// Accepts "AS", "as" and "RLIMIT_AS".
std::optional<RlimitKind> parse_rlimit_kind(std::string_view text);

struct RlimitValue {
  static constexpr std::uint64_t kInfinity = std::numeric_limits<std::uint64_t>::max();

  std::uint64_t soft = kInfinity;
  std::uint64_t hard = kInfinity;

  bool valid() const { return soft <= hard; }
  friend bool operator==(const RlimitValue&, const RlimitValue&) = default;
};

std::string format_limit(std::uint64_t value);  // "unlimited" for kInfinity
// Decimal integer or "unlimited"/"infinity". Byte kinds also accept binary
// K/M/G suffixes. Throws OsError(invalid_value).
std::uint64_t parse_limit_value(std::string_view text, RlimitKind kind);

enum class OsErrc {
  permission_denied,
  hard_limit_raise,
  priority_lowering_denied,
  invalid_value,
  out_of_range,
  no_such_process,
  unknown_user,
  unknown_group,
  system,
};

class OsError : public Error {
 public:
  OsError(OsErrc code, const std::string& message, int sys_errno = 0)
      : Error(message), code_(code), errno_(sys_errno) {}

  OsErrc code() const { return code_; }
  int sys_errno() const { return errno_; }

 private:
  OsErrc code_;
  int errno_;
};

RlimitValue get_rlimit(RlimitKind kind, std::optional<pid_t> pid = std::nullopt);

// Sets both limits (soft defaults to hard) and returns the previous value.
// Raising a hard limit without CAP_SYS_RESOURCE is refused before any change
// is made.
RlimitValue set_rlimit(RlimitKind kind, std::uint64_t hard,
                       std::optional<std::uint64_t> soft = std::nullopt,
                       std::optional<pid_t> pid = std::nullopt);

using UserRef = std::variant<uid_t, std::string>;
using GroupRef = std::variant<gid_t, std::string>;

struct Identity {
  std::optional<UserRef> uid;
  std::optional<GroupRef> gid;

  friend bool operator==(const Identity&, const Identity&) = default;
};

struct ResolvedIdentity {
  uid_t uid = 0;
  gid_t gid = 0;
  std::optional<std::string> user_name;
};

// Current real uid/gid as numbers.
Identity get_identity();
// Resolves names through the user database; a missing gid defaults to the
// target user's primary group. Throws OsError(unknown_user/unknown_group).
ResolvedIdentity resolve_identity(const Identity& id);
// Switches gid, supplementary groups and then uid (real, effective and
// saved). Returns the previous identity.
Identity set_identity(const Identity& id);

std::string user_name(uid_t uid);  // numeric text when unknown
std::string home_directory();      // effective user's home

int get_priority();
// Niceness in [-20, 19]. Lowering needs CAP_SYS_NICE or an RLIMIT_NICE
// ceiling c with niceness >= 20 - c. Returns the read-back value.
int set_priority(int nice);

}  // namespace armorcage
