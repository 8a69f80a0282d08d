#pragma once

#include <stdexcept>
#include <string>

namespace armorcage {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A path that cannot be normalized (relative, or ".." above the root).
class PathError : public Error {
 public:
  using Error::Error;
};

// Malformed glob, brace or variable reference in a path pattern.
class PatternError : public Error {
 public:
  PatternError(const std::string& message, std::size_t offset = 0)
      : Error(message), offset_(offset) {}

  // Byte offset into the pattern source where the problem was found.
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Bad access-mode string such as "rq".
class ModeError : public Error {
 public:
  ModeError(const std::string& message, std::size_t offset)
      : Error(message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace armorcage
