#pragma once

#include <random>
#include <string>
#include <vector>

#include "armorcage/engine.hpp"
#include "armorcage/task.hpp"
#include "testing.hpp"

namespace armorcage::testing {

// Patterns built from whole path segments so the matched set can be
// computed segment by segment, without any glob machinery.
struct SegPattern {
  std::vector<std::vector<std::string>> segs;  // literal alternatives, or {"*"} / {"**"}
  std::string source;
};

SegPattern random_seg_pattern(std::mt19937_64& rng);
bool seg_match(const SegPattern& p, const std::string& path);
// Every path of up to three segments over {a, b, c.pdf}, with and without a trailing '/'.
std::vector<std::string> seg_universe();

struct OracleReport {
  std::size_t cases = 0;
  std::string mismatch;  // empty when everything agreed
};

// Random profiles of at most four rules; compares check_access against the
// enumerated union of matching rules for every universe path and request.
OracleReport run_engine_oracle(std::mt19937_64& rng, int rounds);

// A small directory tree used by randomized task scripts.
struct ScriptSandbox {
  TempDir dir;
  std::vector<std::string> files;
  std::vector<std::string> dirs;

  ScriptSandbox();
};

std::string random_script(std::mt19937_64& rng, const ScriptSandbox& box);
std::string random_sim_profile(std::mt19937_64& rng, const ScriptSandbox& box);

struct LogprofReport {
  int scripts = 0;
  std::size_t suggestions = 0;
  std::size_t replay_denials = 0;
  std::string failure;
};

// Learn in complain mode, suggest, merge, replay in enforce mode.
LogprofReport run_logprof_roundtrip(std::mt19937_64& rng, int scripts);

}  // namespace armorcage::testing
