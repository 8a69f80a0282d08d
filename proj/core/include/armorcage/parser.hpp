#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armorcage/error.hpp"
#include "armorcage/profile.hpp"

namespace armorcage {

class ParseError : public Error {
 public:
  ParseError(std::string file, int line, int column, std::string message);

  const std::string& file() const { return file_; }
  int line() const { return line_; }
  int column() const { return column_; }
  // Message without the "file:line:column:" prefix.
  const std::string& detail() const { return detail_; }

 private:
  std::string file_;
  int line_;
  int column_;
  std::string detail_;
};

// Locates the targets of '#include <...>' directives.
class IncludeResolver {
 public:
  struct Resolved {
    std::string path;
    std::string text;
  };

  virtual ~IncludeResolver() = default;
  virtual std::optional<Resolved> resolve(std::string_view target) const = 0;
};

// Searches an ordered list of directories; the first hit wins.
class DirectoryResolver final : public IncludeResolver {
 public:
  explicit DirectoryResolver(std::vector<std::filesystem::path> roots);

  std::optional<Resolved> resolve(std::string_view target) const override;
  const std::vector<std::filesystem::path>& roots() const { return roots_; }

 private:
  std::vector<std::filesystem::path> roots_;
};

// Include targets served from memory, for tests and embedding.
class MemoryResolver final : public IncludeResolver {
 public:
  MemoryResolver() = default;
  explicit MemoryResolver(std::map<std::string, std::string, std::less<>> files)
      : files_(std::move(files)) {}

  void add(std::string target, std::string text) { files_[std::move(target)] = std::move(text); }
  std::optional<Resolved> resolve(std::string_view target) const override;

 private:
  std::map<std::string, std::string, std::less<>> files_;
};

enum class IncludeMode {
  strict,   // an unresolved include is a ParseError
  lenient,  // an unresolved include is recorded in ProfileSet::unresolved()
};

struct ParseOptions {
  IncludeMode include_mode = IncludeMode::strict;
  // Variables visible before the file's own definitions.
  const VariableTable* base_variables = nullptr;
};

// Parses every profile in `text`. Throws ParseError.
ProfileSet parse_profiles(std::string_view text, std::string_view origin,
                          const IncludeResolver& resolver, const ParseOptions& options = {});

// Canonical text for one profile.
std::string serialize_profile(const Profile& profile);
// File-scope includes and variable definitions, then every profile.
std::string serialize_profile_set(const ProfileSet& set);

// Builds the include search roots from explicit roots, then
// ARMORCAGE_PROFILE_PATH (colon separated), then the defaults.
std::vector<std::filesystem::path> profile_search_roots(
    const std::vector<std::filesystem::path>& explicit_roots, bool include_defaults = true);

struct LibraryLoad {
  ProfileSet set;
  // Files that failed to parse, or identities shadowed by an earlier root.
  std::vector<std::string> diagnostics;
};

// Parses every regular top-level file in each root (subdirectories hold
// include fragments and are skipped). Earlier roots shadow later ones.
LibraryLoad load_profile_library(const std::vector<std::filesystem::path>& roots,
                                 IncludeMode include_mode = IncludeMode::strict);

// Parses a single file, using its directory as an extra include root after
// `roots`.
ProfileSet parse_profile_file(const std::filesystem::path& file,
                              const std::vector<std::filesystem::path>& roots,
                              IncludeMode include_mode = IncludeMode::strict);

}  // namespace armorcage
