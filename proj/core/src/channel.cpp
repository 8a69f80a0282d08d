#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "armorcage/supervisor.hpp"

namespace armorcage {

std::string encode_frame(std::string_view body) {
  std::string out(8, '\0');
  std::uint64_t n = body.size();
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((n >> (8 * i)) & 0xff);
  out.append(body);
  return out;
}

bool decode_frames(std::string_view data, std::vector<std::string>& frames) {
  while (!data.empty()) {
    if (data.size() < 8) return false;
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[i])) << (8 * i);
    data.remove_prefix(8);
    if (n > data.size()) return false;
    frames.emplace_back(data.substr(0, n));
    data.remove_prefix(n);
  }
  return true;
}

}  // namespace armorcage
