#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "armorcage/supervisor.hpp"

namespace armorcage::cli {

// {"status", "signal", "exit_code", "message", "payload_hex",
//  "usage": {"cpu_seconds", "max_rss_bytes"}, "duration_seconds", "audit"}
nlohmann::json result_to_json(const EvalResult& result);
// Throws Error on schema violations.
EvalResult result_from_json(const nlohmann::json& doc);

}  // namespace armorcage::cli
