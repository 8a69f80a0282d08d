#include <gtest/gtest.h>

#include <regex>

#include "armorcage/parser.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

using testing::corpus;
using testing::parse_text;
using testing::profile_dir;
using testing::read_file;

ProfileSet parse_file(const std::string& name) {
  return parse_profile_file(profile_dir() / name, {profile_dir()});
}

// Independent count: lines of the file body that look like "<path> <modes>,".
std::size_t count_rule_lines(const std::string& text) {
  static const std::regex rule(R"(^\s*[/@][^\s]*\s+[rwmixpcsu]+,\s*$)");
  std::size_t n = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) n += std::regex_match(line, rule) ? 1 : 0;
  return n;
}

TEST(CorpusParse, RBaseCounts) {
  const auto set = parse_file("r-base");
  const Profile* p = set.find("r-base");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->rules.size(), 13u);
  EXPECT_EQ(p->includes.size(), 2u);
  EXPECT_EQ(p->capabilities.size(), 0u);
  EXPECT_EQ(p->rules.size(), count_rule_lines(read_file(profile_dir() / "r-base")));
}

TEST(CorpusParse, RCompileCounts) {
  const auto set = parse_file("r-compile");
  const Profile* p = set.find("r-compile");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->rules.size(), 15u);
  EXPECT_EQ(p->rules.size(), count_rule_lines(read_file(profile_dir() / "r-compile")));
}

TEST(CorpusParse, RUserCounts) {
  const auto set = parse_file("r-user");
  const Profile* p = set.find("r-user");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->capabilities.size(), 3u);
  EXPECT_EQ(p->rules.size(), 19u);
  EXPECT_EQ(p->rules.size(), count_rule_lines(read_file(profile_dir() / "r-user")));
}

TEST(CorpusParse, IncludedContentStaysSeparate) {
  const auto set = parse_file("r-base");
  const Profile* p = set.find("r-base");
  ASSERT_NE(p, nullptr);
  EXPECT_FALSE(p->included_rules.empty());
  EXPECT_EQ(p->includes[0], "abstractions/base");
  EXPECT_EQ(set.file_includes(), std::vector<std::string>{"tunables/global"});
  ASSERT_NE(set.variables().find("HOME"), nullptr);
}

TEST(RoundTrip, CorpusIsAFixpoint) {
  for (const char* name : {"r-base", "r-compile", "r-user", "usr.bin.r", "testprofile"}) {
    const auto first = parse_file(name);
    const std::string text = serialize_profile_set(first);
    const auto second = parse_text(text);
    EXPECT_EQ(second, first) << name;
    EXPECT_EQ(serialize_profile_set(second), text) << name;
  }
}

TEST(RoundTrip, SerializedShape) {
  const auto set = parse_text(
      "@{D} = /srv/a /srv/b\n"
      "profile p flags=(complain) {\n"
      "  /x wr,\n  capability kill,\n  change_profile -> q,\n  ^h { /y r, }\n}\n"
      "profile q { }\n");
  const std::string text = serialize_profile_set(set);
  EXPECT_NE(text.find("@{D} = /srv/a /srv/b\n"), std::string::npos) << text;
  EXPECT_NE(text.find("/x rw,"), std::string::npos) << text;
  EXPECT_LT(text.find("capability kill,"), text.find("change_profile -> q,")) << text;
  EXPECT_LT(text.find("change_profile -> q,"), text.find("/x rw,")) << text;
  EXPECT_LT(text.find("/x rw,"), text.find("^h {")) << text;
  EXPECT_EQ(parse_text(text), set);
}

struct GeneratedProfile {
  std::string text;
  std::vector<int> rule_lines;  // 1-based
};

GeneratedProfile random_profile(std::mt19937_64& rng) {
  static const char* kPaths[] = {"/etc/group", "/tmp/**", "/usr/lib{,32,64}/**", "@{HOME}/R/",
                                 "/bin/*",     "/a/[bc]?", "/srv/x"};
  static const char* kModes[] = {"r", "rw", "mr", "rix", "px", "rwm", "w"};
  std::uniform_int_distribution<std::size_t> path(0, std::size(kPaths) - 1);
  std::uniform_int_distribution<std::size_t> mode(0, std::size(kModes) - 1);
  std::uniform_int_distribution<int> count(1, 8);
  GeneratedProfile g;
  int line = 1;
  g.text = "#include <tunables/global>\n";
  ++line;
  g.text += "profile gen {\n";
  ++line;
  for (int i = count(rng); i > 0; --i) {
    g.text += std::string("  ") + kPaths[path(rng)] + " " + kModes[mode(rng)] + ",\n";
    g.rule_lines.push_back(line++);
    if (rng() % 3 == 0) {
      g.text += "  # note\n";
      ++line;
    }
  }
  g.text += "}\n";
  return g;
}

TEST(RoundTrip, GeneratedProfiles) {
  auto rng = testing::make_rng(10);
  for (int i = 0; i < 300; ++i) {
    const auto g = random_profile(rng);
    const auto set = parse_text(g.text);
    const std::string text = serialize_profile_set(set);
    EXPECT_EQ(parse_text(text), set) << g.text;
    EXPECT_EQ(serialize_profile_set(parse_text(text)), text) << g.text;
  }
}

std::string replace_line(const std::string& text, int line, const std::function<std::string(std::string)>& edit) {
  std::istringstream in(text);
  std::string out, cur;
  for (int n = 1; std::getline(in, cur); ++n) out += (n == line ? edit(cur) : cur) + "\n";
  return out;
}

TEST(ParseErrors, CorruptedRuleLineIsReported) {
  auto rng = testing::make_rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto g = random_profile(rng);
    const int line = g.rule_lines[rng() % g.rule_lines.size()];
    const int kind = static_cast<int>(rng() % 3);
    const std::string bad = replace_line(g.text, line, [&](std::string s) {
      const auto comma = s.rfind(',');
      if (kind == 0) return s.substr(0, comma) + "q,";
      if (kind == 1) return s.substr(0, comma);
      return s.substr(0, 2) + "relative" + s.substr(2);
    });
    try {
      parse_text(bad);
      ADD_FAILURE() << "accepted corrupted text:\n" << bad;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what() << "\n" << bad;
      EXPECT_EQ(e.file(), "<test>");
    }
  }
}

TEST(ParseErrors, Positions) {
  try {
    parse_text("profile p {\n  /etc/group rq,\n}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 15);
  }
  try {
    parse_text("profile p {\n  /etc/group r\n}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 15);
  }
  try {
    parse_text("profile p {\n  /etc/group r,\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(ParseErrors, StructuralMistakes) {
  EXPECT_THROW(parse_text("profile p { ^h { ^g { } } }"), ParseError);
  EXPECT_THROW(parse_text("profile p { } profile p { }"), ParseError);
  EXPECT_THROW(parse_text("profile p { /x rixpx, }"), ParseError);
  EXPECT_THROW(parse_text("profile p { capability not_a_cap, }"), ParseError);
  EXPECT_THROW(parse_text("profile p { @{NOPE}/x r, }"), ParseError);
  EXPECT_THROW(parse_text("profile p { /x/{a,b r, }"), ParseError);
  EXPECT_THROW(parse_text("profile p { #include <abstractions/missing> }"), ParseError);
}

TEST(Includes, LenientModeRecordsUnresolved) {
  const auto set =
      parse_text("profile p {\n  #include <abstractions/missing>\n  /x r,\n}\n", IncludeMode::lenient);
  ASSERT_EQ(set.unresolved().size(), 1u);
  EXPECT_EQ(set.unresolved()[0].kind, UnresolvedKind::include);
  EXPECT_EQ(set.unresolved()[0].target, "abstractions/missing");
}

TEST(Includes, MemoryResolverAndCycles) {
  MemoryResolver r;
  r.add("a", "/from/a r,\n#include <b>\n");
  r.add("b", "/from/b w,\n");
  const auto set = parse_profiles("profile p { #include <a> }", "<mem>", r);
  const Profile* p = set.find("p");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->includes, std::vector<std::string>{"a"});
  EXPECT_EQ(p->included_rules.size(), 2u);
  MemoryResolver cyc;
  cyc.add("a", "#include <b>\n");
  cyc.add("b", "#include <a>\n");
  EXPECT_THROW(parse_profiles("profile p { #include <a> }", "<mem>", cyc), ParseError);
}

TEST(Library, LoadsShippedProfiles) {
  const auto set = corpus();
  for (const char* name : {"r-base", "r-compile", "r-user", "/usr/bin/R", "testprofile"}) {
    EXPECT_TRUE(set.contains(name)) << name;
  }
  const Profile* tp = set.find("testprofile");
  ASSERT_NE(tp, nullptr);
  EXPECT_NE(tp->find_hat("testhat"), nullptr);
  EXPECT_EQ(set.attached_to("/usr/bin/R").size(), 1u);
}

}  // namespace
}  // namespace armorcage
