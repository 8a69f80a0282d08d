#include "armorcage/limits.hpp"

#include <grp.h>
#include <linux/capability.h>
#include <pwd.h>
#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "capabilities.hpp"

namespace armorcage {

namespace {

struct KindInfo {
  RlimitKind kind;
  std::string_view name;
  int resource;
  RlimitUnit unit;
};

constexpr KindInfo kKinds[] = {
    {RlimitKind::as, "AS", RLIMIT_AS, RlimitUnit::bytes},
    {RlimitKind::core, "CORE", RLIMIT_CORE, RlimitUnit::bytes},
    {RlimitKind::cpu, "CPU", RLIMIT_CPU, RlimitUnit::seconds},
    {RlimitKind::data, "DATA", RLIMIT_DATA, RlimitUnit::bytes},
    {RlimitKind::fsize, "FSIZE", RLIMIT_FSIZE, RlimitUnit::bytes},
    {RlimitKind::memlock, "MEMLOCK", RLIMIT_MEMLOCK, RlimitUnit::bytes},
    {RlimitKind::msgqueue, "MSGQUEUE", RLIMIT_MSGQUEUE, RlimitUnit::bytes},
    {RlimitKind::nice, "NICE", RLIMIT_NICE, RlimitUnit::priority_ceiling},
    {RlimitKind::nofile, "NOFILE", RLIMIT_NOFILE, RlimitUnit::count},
    {RlimitKind::nproc, "NPROC", RLIMIT_NPROC, RlimitUnit::count},
    {RlimitKind::rtprio, "RTPRIO", RLIMIT_RTPRIO, RlimitUnit::priority_ceiling},
    {RlimitKind::rttime, "RTTIME", RLIMIT_RTTIME, RlimitUnit::microseconds},
    {RlimitKind::sigpending, "SIGPENDING", RLIMIT_SIGPENDING, RlimitUnit::count},
    {RlimitKind::stack, "STACK", RLIMIT_STACK, RlimitUnit::bytes},
};

const KindInfo& info(RlimitKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k;
  }
  return kKinds[0];
}

std::uint64_t from_native(rlim_t v) {
  return v == RLIM_INFINITY ? RlimitValue::kInfinity : static_cast<std::uint64_t>(v);
}

rlim_t to_native(std::uint64_t v) {
  return v == RlimitValue::kInfinity ? RLIM_INFINITY : static_cast<rlim_t>(v);
}

std::string errno_text(int err) { return std::strerror(err); }

[[noreturn]] void throw_prlimit(RlimitKind kind, pid_t pid, int err) {
  const std::string what = "prlimit(" + std::string(to_string(kind)) +
                           (pid ? ", pid " + std::to_string(pid) : std::string()) + "): ";
  switch (err) {
    case ESRCH:
      throw OsError(OsErrc::no_such_process, what + "no such process", err);
    case EPERM:
      throw OsError(OsErrc::permission_denied, what + errno_text(err), err);
    case EINVAL:
      throw OsError(OsErrc::invalid_value, what + errno_text(err), err);
    default:
      throw OsError(OsErrc::system, what + errno_text(err), err);
  }
}

bool lookup_user(uid_t uid, passwd& pw, std::vector<char>& buf) {
  passwd* result = nullptr;
  buf.resize(16384);
  return ::getpwuid_r(uid, &pw, buf.data(), buf.size(), &result) == 0 && result;
}

}  // namespace

std::string_view to_string(RlimitKind kind) { return info(kind).name; }

std::string_view to_string(RlimitUnit unit) {
  switch (unit) {
    case RlimitUnit::bytes:
      return "bytes";
    case RlimitUnit::seconds:
      return "seconds";
    case RlimitUnit::microseconds:
      return "microseconds";
    case RlimitUnit::count:
      return "count";
    case RlimitUnit::priority_ceiling:
      return "ceiling";
  }
  return "count";
}

RlimitUnit unit_of(RlimitKind kind) { return info(kind).unit; }

int native_resource(RlimitKind kind) { return info(kind).resource; }

std::optional<RlimitKind> parse_rlimit_kind(std::string_view text) {
  std::string upper;
  for (const char c : text) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  std::string_view name = upper;
  if (name.rfind("RLIMIT_", 0) == 0) name.remove_prefix(7);
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return std::nullopt;
}

std::string format_limit(std::uint64_t value) {
  return value == RlimitValue::kInfinity ? "unlimited" : std::to_string(value);
}

std::uint64_t parse_limit_value(std::string_view text, RlimitKind kind) {
  std::string lower;
  for (const char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "unlimited" || lower == "infinity" || lower == "inf") return RlimitValue::kInfinity;
  const auto bad = [&] {
    return OsError(OsErrc::invalid_value,
                   "invalid " + std::string(to_string(kind)) + " value '" + std::string(text) + "'");
  };
  std::uint64_t value = 0;
  const auto* begin = lower.data();
  const auto* end = lower.data() + lower.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr == begin) throw bad();
  std::string_view suffix(ptr, static_cast<std::size_t>(end - ptr));
  if (suffix.empty()) return value;
  if (unit_of(kind) != RlimitUnit::bytes) throw bad();
  if (suffix.size() == 2 && suffix[1] == 'b') suffix.remove_suffix(1);
  if (suffix.size() == 3 && suffix.substr(1) == "ib") suffix.remove_suffix(2);
  int shift = 0;
  if (suffix == "k") {
    shift = 10;
  } else if (suffix == "m") {
    shift = 20;
  } else if (suffix == "g") {
    shift = 30;
  } else {
    throw bad();
  }
  if (value > (RlimitValue::kInfinity >> shift)) throw bad();
  return value << shift;
}

RlimitValue get_rlimit(RlimitKind kind, std::optional<pid_t> pid) {
  rlimit old{};
  const pid_t target = pid.value_or(0);
  if (::prlimit(target, static_cast<__rlimit_resource>(native_resource(kind)), nullptr, &old) != 0) {
    throw_prlimit(kind, target, errno);
  }
  return {from_native(old.rlim_cur), from_native(old.rlim_max)};
}

RlimitValue set_rlimit(RlimitKind kind, std::uint64_t hard, std::optional<std::uint64_t> soft,
                       std::optional<pid_t> pid) {
  const RlimitValue next{soft.value_or(hard), hard};
  if (!next.valid()) {
    throw OsError(OsErrc::invalid_value, std::string(to_string(kind)) + ": soft limit " +
                                             format_limit(next.soft) + " exceeds hard limit " +
                                             format_limit(next.hard));
  }
  const pid_t target = pid.value_or(0);
  const RlimitValue current = get_rlimit(kind, pid);
  if (next.hard > current.hard && !detail::has_capability(CAP_SYS_RESOURCE)) {
    throw OsError(OsErrc::hard_limit_raise,
                  std::string(to_string(kind)) + ": raising the hard limit from " +
                      format_limit(current.hard) + " to " + format_limit(next.hard) +
                      " requires privilege",
                  EPERM);
  }
  rlimit want{to_native(next.soft), to_native(next.hard)};
  rlimit old{};
  if (::prlimit(target, static_cast<__rlimit_resource>(native_resource(kind)), &want, &old) != 0) {
    const int err = errno;
    if (err == EPERM && next.hard > current.hard) {
      throw OsError(OsErrc::hard_limit_raise,
                    std::string(to_string(kind)) + ": raising the hard limit requires privilege",
                    err);
    }
    throw_prlimit(kind, target, err);
  }
  return {from_native(old.rlim_cur), from_native(old.rlim_max)};
}

Identity get_identity() {
  Identity id;
  id.uid = UserRef(::getuid());
  id.gid = GroupRef(::getgid());
  return id;
}

ResolvedIdentity resolve_identity(const Identity& id) {
  ResolvedIdentity out;
  out.uid = ::getuid();
  out.gid = ::getgid();
  std::optional<gid_t> primary;
  std::vector<char> buf(16384);
  if (id.uid) {
    passwd pw{};
    passwd* result = nullptr;
    if (const auto* name = std::get_if<std::string>(&*id.uid)) {
      if (::getpwnam_r(name->c_str(), &pw, buf.data(), buf.size(), &result) != 0 || !result) {
        throw OsError(OsErrc::unknown_user, "unknown user '" + *name + "'");
      }
    } else {
      ::getpwuid_r(std::get<uid_t>(*id.uid), &pw, buf.data(), buf.size(), &result);
    }
    if (result) {
      out.uid = result->pw_uid;
      out.user_name = std::string(result->pw_name);
      primary = result->pw_gid;
    } else {
      out.uid = std::get<uid_t>(*id.uid);
      primary = static_cast<gid_t>(out.uid);
    }
  }
  if (id.gid) {
    if (const auto* name = std::get_if<std::string>(&*id.gid)) {
      group gr{};
      group* result = nullptr;
      if (::getgrnam_r(name->c_str(), &gr, buf.data(), buf.size(), &result) != 0 || !result) {
        throw OsError(OsErrc::unknown_group, "unknown group '" + *name + "'");
      }
      out.gid = result->gr_gid;
    } else {
      out.gid = std::get<gid_t>(*id.gid);
    }
  } else if (primary) {
    out.gid = *primary;
  }
  return out;
}

Identity set_identity(const Identity& id) {
  const Identity previous = get_identity();
  const ResolvedIdentity target = resolve_identity(id);

  uid_t ruid, euid, suid;
  gid_t rgid, egid, sgid;
  ::getresuid(&ruid, &euid, &suid);
  ::getresgid(&rgid, &egid, &sgid);
  const bool uid_change = id.uid && !(ruid == target.uid && euid == target.uid && suid == target.uid);
  const bool gid_change =
      (id.uid || id.gid) && !(rgid == target.gid && egid == target.gid && sgid == target.gid);
  const bool can_setuid = detail::has_capability(CAP_SETUID);
  const bool can_setgid = detail::has_capability(CAP_SETGID);
  if (uid_change && !can_setuid) {
    throw OsError(OsErrc::permission_denied,
                  "setuid(" + std::to_string(target.uid) + "): requires privilege", EPERM);
  }
  if (gid_change && !can_setgid) {
    throw OsError(OsErrc::permission_denied,
                  "setgid(" + std::to_string(target.gid) + "): requires privilege", EPERM);
  }

  if (gid_change && ::setresgid(target.gid, target.gid, target.gid) != 0) {
    throw OsError(OsErrc::system, "setresgid: " + errno_text(errno), errno);
  }
  if (id.uid && can_setgid) {
    const int rc = target.user_name ? ::initgroups(target.user_name->c_str(), target.gid)
                                    : ::setgroups(1, &target.gid);
    if (rc != 0) throw OsError(OsErrc::system, "setting supplementary groups: " + errno_text(errno), errno);
  }
  if (uid_change && ::setresuid(target.uid, target.uid, target.uid) != 0) {
    throw OsError(OsErrc::system, "setresuid: " + errno_text(errno), errno);
  }
  return previous;
}

std::string user_name(uid_t uid) {
  passwd pw{};
  std::vector<char> buf;
  if (lookup_user(uid, pw, buf)) return pw.pw_name;
  return std::to_string(uid);
}

std::string home_directory() {
  passwd pw{};
  std::vector<char> buf;
  if (lookup_user(::geteuid(), pw, buf) && pw.pw_dir && *pw.pw_dir) return pw.pw_dir;
  if (const char* home = std::getenv("HOME"); home && *home) return home;
  return "/";
}

int get_priority() {
  errno = 0;
  const int value = ::getpriority(PRIO_PROCESS, 0);
  if (value == -1 && errno != 0) throw OsError(OsErrc::system, "getpriority: " + errno_text(errno), errno);
  return value;
}

int set_priority(int nice) {
  if (nice < -20 || nice > 19) {
    throw OsError(OsErrc::out_of_range,
                  "priority " + std::to_string(nice) + " outside [-20, 19]");
  }
  const int current = get_priority();
  if (nice < current && !detail::has_capability(CAP_SYS_NICE)) {
    const auto ceiling = get_rlimit(RlimitKind::nice).soft;
    if (ceiling != RlimitValue::kInfinity && static_cast<std::uint64_t>(20 - nice) > ceiling) {
      throw OsError(OsErrc::priority_lowering_denied,
                    "The caller attempted to lower a process priority from " +
                        std::to_string(current) + " to " + std::to_string(nice) +
                        ", but did not have the required privilege",
                    EACCES);
    }
  }
  if (::setpriority(PRIO_PROCESS, 0, nice) != 0) {
    const int err = errno;
    if (err == EACCES) {
      throw OsError(OsErrc::priority_lowering_denied,
                    "The caller attempted to lower a process priority, but did not have the "
                    "required privilege",
                    err);
    }
    throw OsError(OsErrc::permission_denied, "setpriority: " + errno_text(err), err);
  }
  return get_priority();
}

}  // namespace armorcage
