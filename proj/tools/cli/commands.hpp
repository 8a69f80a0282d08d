#pragma once

#include <iosfwd>

namespace armorcage::cli {

// Exit codes of `run`.
inline constexpr int kRunOk = 0;
inline constexpr int kRunDenied = 10;
inline constexpr int kRunTimeout = 11;
inline constexpr int kRunLimitKilled = 12;
inline constexpr int kRunTaskError = 13;
inline constexpr int kRunSetupError = 64;

// lint, logprof, limits, simulate.
inline constexpr int kClean = 0;
inline constexpr int kFindings = 1;
inline constexpr int kUsage = 2;

int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace armorcage::cli
