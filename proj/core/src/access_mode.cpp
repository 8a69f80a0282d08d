#include "armorcage/access_mode.hpp"

#include <bit>
#include <string>

#include "armorcage/error.hpp"

namespace armorcage {

AccessModeSet AccessModeSet::exec(ExecMode mode) {
  switch (mode) {
    case ExecMode::discrete:
      return AccessModeSet(kDiscreteExec);
    case ExecMode::child:
      return AccessModeSet(kChildExec);
    case ExecMode::inherit:
      return AccessModeSet(kInheritExec);
    case ExecMode::unconfined:
      return AccessModeSet(kUnconfinedExec);
  }
  return {};
}

AccessModeSet AccessModeSet::parse(std::string_view text) {
  if (text.empty()) throw ModeError("empty access mode", 0);
  AccessModeSet out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    switch (c) {
      case 'r':
        out |= read();
        continue;
      case 'w':
        out |= write();
        continue;
      case 'm':
        out |= mmap();
        continue;
      default:
        break;
    }
    AccessModeSet exec_flag;
    if ((c == 'i' || c == 'p' || c == 'u') && i + 1 < text.size() && text[i + 1] == 'x') {
      exec_flag = AccessModeSet(c == 'i' ? kInheritExec : c == 'p' ? kDiscreteExec : kUnconfinedExec);
    } else if (c == 'c' && i + 1 < text.size() && text[i + 1] == 's') {
      exec_flag = AccessModeSet(kChildExec);
    } else {
      throw ModeError(std::string("unknown access mode '") + c + "'", i);
    }
    if (out.has_exec() && out.exec_part() != exec_flag) {
      throw ModeError("conflicting exec modes '" + out.exec_part().to_string() + "' and '" +
                          exec_flag.to_string() + "'",
                      i);
    }
    out |= exec_flag;
    ++i;
  }
  return out;
}

std::string AccessModeSet::to_string() const {
  std::string s;
  if (has(kRead)) s += 'r';
  if (has(kWrite)) s += 'w';
  if (has(kMmap)) s += 'm';
  if (has(kDiscreteExec)) s += "px";
  if (has(kChildExec)) s += "cs";
  if (has(kInheritExec)) s += "ix";
  if (has(kUnconfinedExec)) s += "ux";
  return s;
}

int AccessModeSet::exec_count() const { return std::popcount(static_cast<unsigned>(bits_ & kExecMask)); }

std::optional<ExecMode> AccessModeSet::exec_mode() const {
  if (exec_count() != 1) return std::nullopt;
  if (has(kDiscreteExec)) return ExecMode::discrete;
  if (has(kChildExec)) return ExecMode::child;
  if (has(kInheritExec)) return ExecMode::inherit;
  return ExecMode::unconfined;
}

std::string_view to_string(ExecMode mode) {
  switch (mode) {
    case ExecMode::discrete:
      return "px";
    case ExecMode::child:
      return "cs";
    case ExecMode::inherit:
      return "ix";
    case ExecMode::unconfined:
      return "ux";
  }
  return "?";
}

}  // namespace armorcage
