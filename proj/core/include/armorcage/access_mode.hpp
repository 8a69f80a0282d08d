#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace armorcage {

enum class ExecMode : std::uint8_t {
  discrete,    // px
  child,       // cs
  inherit,     // ix
  unconfined,  // ux
};

// Flag set over {r, w, m, px, cs, ix, ux}.
//
// The set itself can hold several exec modes because it is also used for the
// union of grants across matching rules. A set used as the modes of a single
// rule must satisfy valid_for_rule(): at most one exec mode.
class AccessModeSet {
 public:
  enum Flag : std::uint8_t {
    kRead = 1u << 0,
    kWrite = 1u << 1,
    kMmap = 1u << 2,
    kDiscreteExec = 1u << 3,
    kChildExec = 1u << 4,
    kInheritExec = 1u << 5,
    kUnconfinedExec = 1u << 6,
  };
  static constexpr std::uint8_t kExecMask =
      kDiscreteExec | kChildExec | kInheritExec | kUnconfinedExec;
  static constexpr std::uint8_t kAllMask = 0x7f;

  constexpr AccessModeSet() = default;
  constexpr explicit AccessModeSet(std::uint8_t bits) : bits_(bits & kAllMask) {}

  static AccessModeSet read() { return AccessModeSet(kRead); }
  static AccessModeSet write() { return AccessModeSet(kWrite); }
  static AccessModeSet mmap() { return AccessModeSet(kMmap); }
  static AccessModeSet exec(ExecMode mode);

  // Parses a rule mode string such as "rix" or "mrwix". Throws ModeError with
  // the offset of the offending character.
  static AccessModeSet parse(std::string_view text);

  // Canonical text: r, w, m, then exec modes in px, cs, ix, ux order.
  std::string to_string() const;

  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool has(Flag flag) const { return (bits_ & flag) != 0; }
  constexpr bool contains(AccessModeSet other) const {
    return (bits_ & other.bits_) == other.bits_;
  }
  constexpr bool has_exec() const { return (bits_ & kExecMask) != 0; }
  constexpr AccessModeSet exec_part() const { return AccessModeSet(bits_ & kExecMask); }
  constexpr AccessModeSet without_exec() const {
    return AccessModeSet(bits_ & ~kExecMask);
  }
  int exec_count() const;
  bool valid_for_rule() const { return !empty() && exec_count() <= 1; }
  // The single exec mode of a rule set, if any.
  std::optional<ExecMode> exec_mode() const;

  constexpr AccessModeSet operator|(AccessModeSet o) const {
    return AccessModeSet(bits_ | o.bits_);
  }
  constexpr AccessModeSet operator&(AccessModeSet o) const {
    return AccessModeSet(bits_ & o.bits_);
  }
  constexpr AccessModeSet operator-(AccessModeSet o) const {
    return AccessModeSet(bits_ & ~o.bits_);
  }
  AccessModeSet& operator|=(AccessModeSet o) {
    bits_ |= o.bits_;
    return *this;
  }
  friend constexpr bool operator==(AccessModeSet, AccessModeSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

std::string_view to_string(ExecMode mode);

}  // namespace armorcage
