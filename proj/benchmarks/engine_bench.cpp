#include <benchmark/benchmark.h>

#include "armorcage/engine.hpp"
#include "armorcage/parser.hpp"

namespace {

using namespace armorcage;

const ProfileSet& library() {
  static const ProfileSet set = load_profile_library({ARMORCAGE_BENCH_PROFILES}).set;
  return set;
}

void BM_CheckAllowed(benchmark::State& state) {
  const auto ctx = SubjectContext::confined("r-user");
  const auto req = AccessRequest::read("/usr/share/R/library/base/R/base");
  for (auto _ : state) benchmark::DoNotOptimize(check_access(ctx, library(), req));
}
BENCHMARK(BM_CheckAllowed);

void BM_CheckDenied(benchmark::State& state) {
  const auto ctx = SubjectContext::confined("r-user");
  const auto req = AccessRequest::read("/home/alice/Documents/taxes.pdf");
  for (auto _ : state) benchmark::DoNotOptimize(check_access(ctx, library(), req));
}
BENCHMARK(BM_CheckDenied);

void BM_SyntheticProfile(benchmark::State& state) {
  std::string text = "profile big {\n";
  for (int i = 0; i < state.range(0); ++i) text += "  /srv/app" + std::to_string(i) + "/** rw,\n";
  text += "}\n";
  const MemoryResolver none;
  const auto set = parse_profiles(text, "<bench>", none);
  const auto ctx = SubjectContext::confined("big");
  const auto req = AccessRequest::write("/srv/app" + std::to_string(state.range(0) - 1) + "/data/x");
  for (auto _ : state) benchmark::DoNotOptimize(check_access(ctx, set, req));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SyntheticProfile)->RangeMultiplier(4)->Range(4, 4096)->Complexity();

}  // namespace
