#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "armorcage/parser.hpp"

namespace {

using namespace armorcage;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void BM_ParseRUser(benchmark::State& state) {
  const std::string text = slurp(std::string(ARMORCAGE_BENCH_PROFILES) + "/r-user");
  const DirectoryResolver resolver({ARMORCAGE_BENCH_PROFILES});
  for (auto _ : state) benchmark::DoNotOptimize(parse_profiles(text, "r-user", resolver));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseRUser);

void BM_RoundTrip(benchmark::State& state) {
  const DirectoryResolver resolver({ARMORCAGE_BENCH_PROFILES});
  const auto set = parse_profiles(slurp(std::string(ARMORCAGE_BENCH_PROFILES) + "/r-user"), "r-user", resolver);
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_profiles(serialize_profile_set(set), "<bench>", resolver));
  }
}
BENCHMARK(BM_RoundTrip);

void BM_LoadLibrary(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(load_profile_library({ARMORCAGE_BENCH_PROFILES}));
}
BENCHMARK(BM_LoadLibrary);

}  // namespace
