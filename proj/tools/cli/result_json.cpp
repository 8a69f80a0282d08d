#include "result_json.hpp"

#include "armorcage/audit.hpp"

namespace armorcage::cli {

namespace {

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const unsigned char c : bytes) {
    out += kDigits[c >> 4];
    out += kDigits[c & 0xf];
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  if (hex.size() % 2) throw Error("payload_hex has odd length");
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out += static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16));
  }
  return out;
}

}  // namespace

nlohmann::json result_to_json(const EvalResult& r) {
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& rec : r.audit) {
    auto line = format_record(rec);
    line.pop_back();
    audit.push_back(line);
  }
  return {
      {"status", std::string(to_string(r.status))},
      {"signal", r.signal ? nlohmann::json(signal_name(*r.signal)) : nlohmann::json()},
      {"exit_code", r.exit_code ? nlohmann::json(*r.exit_code) : nlohmann::json()},
      {"message", r.message},
      {"payload_hex", to_hex(r.payload)},
      {"usage", {{"cpu_seconds", r.usage.cpu_seconds}, {"max_rss_bytes", r.usage.max_rss_bytes}}},
      {"duration_seconds", r.duration},
      {"audit", audit},
  };
}

EvalResult result_from_json(const nlohmann::json& doc) {
  try {
    EvalResult r;
    const auto status = parse_eval_status(doc.at("status").get<std::string>());
    if (!status) throw Error("unknown status");
    r.status = *status;
    if (!doc.at("signal").is_null()) {
      const auto sig = parse_signal_name(doc.at("signal").get<std::string>());
      if (!sig) throw Error("unknown signal name");
      r.signal = *sig;
    }
    if (!doc.at("exit_code").is_null()) r.exit_code = doc.at("exit_code").get<int>();
    r.message = doc.at("message").get<std::string>();
    r.payload = from_hex(doc.at("payload_hex").get<std::string>());
    r.usage.cpu_seconds = doc.at("usage").at("cpu_seconds").get<double>();
    r.usage.max_rss_bytes = doc.at("usage").at("max_rss_bytes").get<std::uint64_t>();
    r.duration = doc.at("duration_seconds").get<double>();
    for (const auto& line : doc.at("audit")) r.audit.push_back(parse_record(line.get<std::string>()));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("result JSON does not match the schema: ") + e.what());
  }
}

}  // namespace armorcage::cli
