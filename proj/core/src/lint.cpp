#include "armorcage/lint.hpp"

#include "armorcage/path.hpp"

namespace armorcage {

std::string_view to_string(LintCode code) {
  switch (code) {
    case LintCode::write_map_hazard:
      return "write-map-hazard";
    case LintCode::unresolved_transition:
      return "unresolved-transition";
    case LintCode::unresolved_px_target:
      return "unresolved-px-target";
    case LintCode::unresolved_cs_target:
      return "unresolved-cs-target";
    case LintCode::unreachable_hat:
      return "unreachable-hat";
    case LintCode::unresolved_include:
      return "unresolved-include";
  }
  return "unknown";
}

namespace {

void lint_rules(const Profile& p, const Profile* parent, const std::string& owner,
                std::vector<Diagnostic>& out) {
  for (const auto& rule : p.rules) {
    const auto m = rule.modes;
    if (m.has(AccessModeSet::kWrite) &&
        (m.has(AccessModeSet::kMmap) || m.has(AccessModeSet::kInheritExec))) {
      out.push_back({LintCode::write_map_hazard, owner,
                     "'" + rule.pattern.source() + " " + m.to_string() +
                         "' lets written files be mapped or executed",
                     rule.location});
    }
  }
  for (const auto* rule : p.effective_rules()) {
    if (rule->modes.exec_mode() != ExecMode::child) continue;
    const Profile& hat_owner = parent ? *parent : p;
    bool resolved = false;
    if (!parent) {
      if (rule->pattern.is_literal()) {
        resolved = p.find_hat(last_segment(rule->pattern.expansions().front())) != nullptr;
      } else {
        resolved = !p.hats.empty();
      }
    }
    if (!resolved) {
      out.push_back({LintCode::unresolved_cs_target, owner,
                     "cs rule '" + rule->pattern.source() + "' names no hat of " + hat_owner.name,
                     rule->location});
    }
  }
}

}  // namespace

std::vector<Diagnostic> lint_profiles(const ProfileSet& set) {
  std::vector<Diagnostic> out;
  for (const auto& p : set.profiles()) {
    lint_rules(p, nullptr, p.name, out);
    for (const auto& hat : p.hats) {
      const std::string owner = p.name + "^" + hat.name;
      lint_rules(hat, &p, owner, out);
      if (p.mode == ProfileMode::disabled) {
        out.push_back({LintCode::unreachable_hat, owner,
                       "hat can never be entered because " + p.name + " is disabled",
                       hat.location});
      }
    }
  }
  for (const auto& u : set.unresolved()) {
    switch (u.kind) {
      case UnresolvedKind::transition:
        out.push_back({LintCode::unresolved_transition, u.profile,
                       "change_profile target '" + u.target + "' is not defined", u.location});
        break;
      case UnresolvedKind::px_target:
        out.push_back({LintCode::unresolved_px_target, u.profile,
                       "no profile attached to " + u.target, u.location});
        break;
      case UnresolvedKind::include:
        out.push_back({LintCode::unresolved_include, u.profile.empty() ? "-" : u.profile,
                       "include <" + u.target + "> not found", u.location});
        break;
    }
  }
  return out;
}

std::string format_diagnostic(const Diagnostic& d) {
  std::string loc = d.location.file.empty() ? "-" : d.location.file;
  if (d.location.line > 0) loc += ":" + std::to_string(d.location.line);
  return loc + ": [" + std::string(to_string(d.code)) + "] " + d.profile + ": " + d.message;
}

}  // namespace armorcage
