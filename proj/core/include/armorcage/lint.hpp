#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "armorcage/profile.hpp"

namespace armorcage {

enum class LintCode {
  write_map_hazard,       // a writable pattern also carries m or ix
  unresolved_transition,  // change_profile -> target not in the set
  unresolved_px_target,   // px rule with no path-attached profile behind it
  unresolved_cs_target,   // cs rule naming a hat that does not exist
  unreachable_hat,        // hat whose parent profile is disabled
  unresolved_include,
};

std::string_view to_string(LintCode code);

struct Diagnostic {
  LintCode code;
  std::string profile;
  std::string message;
  SourceLocation location;
};

std::vector<Diagnostic> lint_profiles(const ProfileSet& set);

// "file:line: [code] profile: message"
std::string format_diagnostic(const Diagnostic& diagnostic);

}  // namespace armorcage
