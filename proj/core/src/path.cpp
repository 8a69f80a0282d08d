#include "armorcage/path.hpp"

#include <string>
#include <vector>

#include "armorcage/error.hpp"

namespace armorcage {

std::string normalize_path(std::string_view raw) {
  if (raw.empty()) throw PathError("empty path");
  if (raw.front() != '/') throw PathError("relative path: " + std::string(raw));

  std::vector<std::string_view> segments;
  bool trailing = false;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    while (pos < raw.size() && raw[pos] == '/') ++pos;
    if (pos >= raw.size()) {
      trailing = true;
      break;
    }
    const std::size_t end = raw.find('/', pos);
    const std::string_view seg = raw.substr(pos, end == std::string_view::npos ? raw.size() - pos : end - pos);
    pos = end == std::string_view::npos ? raw.size() : end;
    if (seg == ".") {
      trailing = pos >= raw.size();
      continue;
    }
    if (seg == "..") {
      if (segments.empty()) throw PathError("path escapes root: " + std::string(raw));
      segments.pop_back();
      trailing = pos >= raw.size();
      continue;
    }
    segments.push_back(seg);
    trailing = false;
  }
  // A path ending in "/." or "/.." names a directory; so does "dir/".
  if (!raw.empty() && raw.back() == '/') trailing = true;

  std::string out;
  for (const auto seg : segments) {
    out += '/';
    out += seg;
  }
  if (out.empty()) return "/";
  if (trailing) out += '/';
  return out;
}

bool is_directory_path(std::string_view path) { return !path.empty() && path.back() == '/'; }

std::string_view last_segment(std::string_view path) {
  while (path.size() > 1 && path.back() == '/') path.remove_suffix(1);
  const auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

}  // namespace armorcage
