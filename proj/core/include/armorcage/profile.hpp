#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armorcage/access_mode.hpp"
#include "armorcage/pattern.hpp"

namespace armorcage {

enum class ProfileMode { enforce, complain, disabled };

std::string_view to_string(ProfileMode mode);
std::optional<ProfileMode> parse_profile_mode(std::string_view text);

// Where a construct came from. Never part of equality.
struct SourceLocation {
  std::string file;
  int line = 0;
  int column = 0;
};

struct FileRule {
  PathPattern pattern;
  AccessModeSet modes;
  SourceLocation location;

  friend bool operator==(const FileRule& a, const FileRule& b) {
    return a.pattern == b.pattern && a.modes == b.modes;
  }
};

struct CapabilityRule {
  std::string name;

  friend bool operator==(const CapabilityRule&, const CapabilityRule&) = default;
};

bool is_valid_capability_name(std::string_view name);

struct Profile {
  // "r-base" for named profiles, "/usr/bin/R" for path-attached ones.
  std::string name;
  // Executable path (or glob) this profile attaches to. Equals `name` for
  // path-attached profiles; optional for named ones.
  std::optional<std::string> attachment;
  std::vector<std::string> includes;
  std::vector<FileRule> rules;
  std::vector<CapabilityRule> capabilities;
  // Content inlined from `includes`, kept apart from the profile's own text.
  std::vector<FileRule> included_rules;
  std::vector<CapabilityRule> included_capabilities;
  std::vector<std::string> transitions;
  std::vector<Profile> hats;
  ProfileMode mode = ProfileMode::enforce;
  SourceLocation location;

  bool is_path_attached() const { return !name.empty() && name.front() == '/'; }
  const Profile* find_hat(std::string_view hat) const;
  bool allows_transition_to(std::string_view target) const;
  bool has_capability(std::string_view cap) const;

  // Own rules followed by included rules.
  std::vector<const FileRule*> effective_rules() const;

  friend bool operator==(const Profile& a, const Profile& b);
};

struct VariableDefinition {
  std::string name;
  std::vector<std::string> values;
  bool append = false;

  friend bool operator==(const VariableDefinition&, const VariableDefinition&) = default;
};

enum class UnresolvedKind { transition, px_target, include };

struct UnresolvedReference {
  UnresolvedKind kind;
  std::string profile;
  std::string target;
  SourceLocation location;
};

// Profiles loaded together, with the variables used to compile their rules.
class ProfileSet {
 public:
  ProfileSet() = default;

  const std::vector<Profile>& profiles() const { return profiles_; }
  const Profile* find(std::string_view name) const;
  Profile* find_mutable(std::string_view name);
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // Throws Error on a duplicate identity.
  void add(Profile profile);
  // Adds unless the identity already exists. Returns false when skipped.
  bool add_if_absent(Profile profile);

  // Path-attached profiles whose attachment matches `exec_path`. Literal
  // attachments sort before glob ones.
  std::vector<const Profile*> attached_to(std::string_view exec_path) const;

  VariableTable& variables() { return variables_; }
  const VariableTable& variables() const { return variables_; }

  // Includes and variable definitions written at file scope.
  std::vector<std::string>& file_includes() { return file_includes_; }
  const std::vector<std::string>& file_includes() const { return file_includes_; }
  std::vector<VariableDefinition>& local_definitions() { return local_definitions_; }
  const std::vector<VariableDefinition>& local_definitions() const {
    return local_definitions_;
  }

  std::vector<UnresolvedReference>& unresolved() { return unresolved_; }
  const std::vector<UnresolvedReference>& unresolved() const { return unresolved_; }

  // Recomputes unresolved transitions and px targets. Unresolved includes
  // recorded by the parser are kept.
  void refresh_unresolved();

  friend bool operator==(const ProfileSet& a, const ProfileSet& b);

 private:
  std::vector<Profile> profiles_;
  VariableTable variables_;
  std::vector<std::string> file_includes_;
  std::vector<VariableDefinition> local_definitions_;
  std::vector<UnresolvedReference> unresolved_;
};

}  // namespace armorcage
