#include "armorcage/profile.hpp"

#include <algorithm>

#include "armorcage/error.hpp"

namespace armorcage {

std::string_view to_string(ProfileMode mode) {
  switch (mode) {
    case ProfileMode::enforce:
      return "enforce";
    case ProfileMode::complain:
      return "complain";
    case ProfileMode::disabled:
      return "disabled";
  }
  return "?";
}

std::optional<ProfileMode> parse_profile_mode(std::string_view text) {
  if (text == "enforce") return ProfileMode::enforce;
  if (text == "complain") return ProfileMode::complain;
  if (text == "disabled" || text == "disable") return ProfileMode::disabled;
  return std::nullopt;
}

bool is_valid_capability_name(std::string_view name) {
  static constexpr std::string_view kNames[] = {
      "audit_control", "audit_read",     "audit_write",  "block_suspend",    "bpf",
      "checkpoint_restore", "chown",     "dac_override", "dac_read_search",  "fowner",
      "fsetid",        "ipc_lock",       "ipc_owner",    "kill",             "lease",
      "linux_immutable", "mac_admin",    "mac_override", "mknod",            "net_admin",
      "net_bind_service", "net_broadcast", "net_raw",    "perfmon",          "setfcap",
      "setgid",        "setpcap",        "setuid",       "sys_admin",        "sys_boot",
      "sys_chroot",    "sys_module",     "sys_nice",     "sys_pacct",        "sys_ptrace",
      "sys_rawio",     "sys_resource",   "sys_time",     "sys_tty_config",   "syslog",
      "wake_alarm"};
  return std::find(std::begin(kNames), std::end(kNames), name) != std::end(kNames);
}

const Profile* Profile::find_hat(std::string_view hat) const {
  const auto it = std::find_if(hats.begin(), hats.end(), [&](const Profile& h) { return h.name == hat; });
  return it == hats.end() ? nullptr : &*it;
}

bool Profile::allows_transition_to(std::string_view target) const {
  return std::find(transitions.begin(), transitions.end(), target) != transitions.end();
}

bool Profile::has_capability(std::string_view cap) const {
  const auto same = [&](const CapabilityRule& c) { return c.name == cap; };
  return std::any_of(capabilities.begin(), capabilities.end(), same) ||
         std::any_of(included_capabilities.begin(), included_capabilities.end(), same);
}

std::vector<const FileRule*> Profile::effective_rules() const {
  std::vector<const FileRule*> out;
  out.reserve(rules.size() + included_rules.size());
  for (const auto& r : rules) out.push_back(&r);
  for (const auto& r : included_rules) out.push_back(&r);
  return out;
}

bool operator==(const Profile& a, const Profile& b) {
  return a.name == b.name && a.attachment == b.attachment && a.includes == b.includes &&
         a.rules == b.rules && a.capabilities == b.capabilities &&
         a.included_rules == b.included_rules &&
         a.included_capabilities == b.included_capabilities && a.transitions == b.transitions &&
         a.hats == b.hats && a.mode == b.mode;
}

const Profile* ProfileSet::find(std::string_view name) const {
  const auto it = std::find_if(profiles_.begin(), profiles_.end(),
                               [&](const Profile& p) { return p.name == name; });
  return it == profiles_.end() ? nullptr : &*it;
}

Profile* ProfileSet::find_mutable(std::string_view name) {
  return const_cast<Profile*>(std::as_const(*this).find(name));
}

void ProfileSet::add(Profile profile) {
  if (contains(profile.name)) throw Error("duplicate profile identity '" + profile.name + "'");
  profiles_.push_back(std::move(profile));
}

bool ProfileSet::add_if_absent(Profile profile) {
  if (contains(profile.name)) return false;
  profiles_.push_back(std::move(profile));
  return true;
}

std::vector<const Profile*> ProfileSet::attached_to(std::string_view exec_path) const {
  std::vector<const Profile*> literal, glob;
  for (const auto& p : profiles_) {
    if (!p.attachment) continue;
    try {
      const auto pattern = PathPattern::compile(*p.attachment, variables_);
      if (!pattern.matches(exec_path)) continue;
      (pattern.is_literal() ? literal : glob).push_back(&p);
    } catch (const PatternError&) {
      continue;
    }
  }
  literal.insert(literal.end(), glob.begin(), glob.end());
  return literal;
}

namespace {

bool px_rule_resolves(const FileRule& rule, const ProfileSet& set) {
  for (const auto& p : set.profiles()) {
    if (!p.attachment) continue;
    if (rule.pattern.matches(*p.attachment)) return true;
    if (rule.pattern.is_literal() && !set.attached_to(rule.pattern.expansions().front()).empty()) {
      return true;
    }
  }
  return false;
}

void collect_unresolved(const Profile& p, const std::string& owner, const ProfileSet& set,
                        std::vector<UnresolvedReference>& out) {
  for (const auto& target : p.transitions) {
    if (!set.contains(target)) {
      out.push_back({UnresolvedKind::transition, owner, target, p.location});
    }
  }
  for (const auto* rule : p.effective_rules()) {
    if (rule->modes.exec_mode() == ExecMode::discrete && !px_rule_resolves(*rule, set)) {
      out.push_back({UnresolvedKind::px_target, owner, rule->pattern.source(), rule->location});
    }
  }
}

}  // namespace

void ProfileSet::refresh_unresolved() {
  std::vector<UnresolvedReference> fresh;
  for (const auto& u : unresolved_) {
    if (u.kind == UnresolvedKind::include) fresh.push_back(u);
  }
  for (const auto& p : profiles_) {
    collect_unresolved(p, p.name, *this, fresh);
    for (const auto& hat : p.hats) collect_unresolved(hat, p.name + "^" + hat.name, *this, fresh);
  }
  unresolved_ = std::move(fresh);
}

bool operator==(const ProfileSet& a, const ProfileSet& b) {
  return a.profiles_ == b.profiles_ && a.variables_ == b.variables_ &&
         a.file_includes_ == b.file_includes_ && a.local_definitions_ == b.local_definitions_;
}

}  // namespace armorcage
