#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "armorcage/access_mode.hpp"

namespace armorcage {

enum class Operation { read, write, mmap, exec, list };

std::string_view to_string(Operation op);
std::optional<Operation> parse_operation(std::string_view text);

// One mediated request, as written to the audit log.
struct AuditRecord {
  // ISO-8601 UTC. Left empty by the engine; sinks stamp it on write.
  std::string timestamp;
  std::string profile;
  std::optional<std::string> hat;
  Operation operation = Operation::read;
  std::string path;
  AccessModeSet requested;
  bool allowed = false;
  bool effective = false;

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

}  // namespace armorcage
