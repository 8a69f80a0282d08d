#pragma once

#include <string>
#include <string_view>

namespace armorcage {

// Lexically normalizes an absolute path: collapses "//" and "/./", resolves
// ".." without touching the filesystem and keeps a single trailing '/' when
// the input names a directory. Throws PathError for relative paths and for
// ".." above the root.
std::string normalize_path(std::string_view raw);

bool is_directory_path(std::string_view path);

// Last path segment, ignoring a trailing '/'.
std::string_view last_segment(std::string_view path);

}  // namespace armorcage
