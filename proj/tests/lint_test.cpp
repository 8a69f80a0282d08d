#include <gtest/gtest.h>

#include <algorithm>

#include "armorcage/lint.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

using testing::parse_text;

std::vector<LintCode> codes(const std::string& text) {
  std::vector<LintCode> out;
  for (const auto& d : lint_profiles(parse_text(text, IncludeMode::lenient))) out.push_back(d.code);
  return out;
}

bool has(const std::vector<LintCode>& v, LintCode c) {
  return std::find(v.begin(), v.end(), c) != v.end();
}

TEST(Lint, CleanProfileHasNoFindings) {
  EXPECT_TRUE(codes("profile p { /etc/group r, /tmp/** rw, }").empty());
}

TEST(Lint, WriteWithMapOrInheritExec) {
  EXPECT_TRUE(has(codes("profile p { /tmp/** rwm, }"), LintCode::write_map_hazard));
  EXPECT_TRUE(has(codes("profile p { /tmp/** rwix, }"), LintCode::write_map_hazard));
  EXPECT_FALSE(has(codes("profile p { /tmp/** rm, }"), LintCode::write_map_hazard));
  EXPECT_FALSE(has(codes("profile p { /tmp/** rw, }"), LintCode::write_map_hazard));
}

TEST(Lint, UnresolvedTransitionAndPx) {
  const auto c = codes("profile p { change_profile -> ghost, /usr/bin/tool px, }");
  EXPECT_TRUE(has(c, LintCode::unresolved_transition));
  EXPECT_TRUE(has(c, LintCode::unresolved_px_target));
  const auto ok = codes("profile p { change_profile -> q, /usr/bin/tool px, }\n"
                        "profile q { }\n/usr/bin/tool { }\n");
  EXPECT_FALSE(has(ok, LintCode::unresolved_transition));
  EXPECT_FALSE(has(ok, LintCode::unresolved_px_target));
}

TEST(Lint, ChildExecNeedsHat) {
  EXPECT_TRUE(has(codes("profile p { /usr/bin/helper cs, }"), LintCode::unresolved_cs_target));
  EXPECT_FALSE(
      has(codes("profile p { /usr/bin/helper cs, ^helper { } }"), LintCode::unresolved_cs_target));
  EXPECT_TRUE(has(codes("profile p { ^h { /usr/bin/helper cs, } ^helper { } }"),
                  LintCode::unresolved_cs_target));
}

TEST(Lint, HatUnderDisabledProfile) {
  EXPECT_TRUE(has(codes("profile p flags=(disabled) { ^h { } }"), LintCode::unreachable_hat));
  EXPECT_FALSE(has(codes("profile p { ^h { } }"), LintCode::unreachable_hat));
}

TEST(Lint, UnresolvedInclude) {
  EXPECT_TRUE(has(codes("profile p { #include <abstractions/missing> }"), LintCode::unresolved_include));
}

TEST(Lint, DiagnosticFormat) {
  const auto set = parse_text("profile p {\n  /tmp/** rwm,\n}\n");
  const auto d = lint_profiles(set);
  ASSERT_EQ(d.size(), 1u);
  const auto s = format_diagnostic(d[0]);
  EXPECT_EQ(s.rfind("<test>:2: [write-map-hazard] p: ", 0), 0u) << s;
}

TEST(Lint, ShippedProfilesOnlyFlagWritableMaps) {
  for (const auto& d : lint_profiles(testing::corpus())) {
    EXPECT_EQ(d.code, LintCode::write_map_hazard) << format_diagnostic(d);
  }
}

}  // namespace
}  // namespace armorcage
