#include "armorcage/sanitize.hpp"

namespace armorcage {

std::string sanitize_identifier(std::string_view input) {
  std::string out;
  out.reserve(input.size());
  for (const char c : input) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) out += c;
  }
  return out;
}

}  // namespace armorcage
