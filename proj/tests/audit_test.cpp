#include <gtest/gtest.h>

#include <thread>

#include "armorcage/audit.hpp"
#include "armorcage/task.hpp"
#include "generators.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

using testing::TempDir;

AuditRecord random_record(std::mt19937_64& rng) {
  static const char* kPieces[] = {"/etc", "/a b", "/tab\there", "/nl\nx", "/back\\slash", "/x", "/"};
  AuditRecord r;
  r.timestamp = "2026-01-0" + std::to_string(1 + rng() % 9) + "T10:00:00.000000Z";
  r.profile = rng() % 2 ? "r-base" : "/usr/bin/R";
  if (rng() % 3 == 0) r.hat = "testhat";
  r.operation = static_cast<Operation>(rng() % 5);
  for (int i = 0; i < 1 + static_cast<int>(rng() % 3); ++i) r.path += kPieces[rng() % std::size(kPieces)];
  r.requested = AccessModeSet::parse(rng() % 2 ? "r" : "rw");
  r.allowed = rng() % 2;
  r.effective = r.allowed || rng() % 2;
  return r;
}

TEST(AuditFormat, RoundTrip) {
  auto rng = testing::make_rng(40);
  for (int i = 0; i < 2000; ++i) {
    const auto r = random_record(rng);
    const auto line = format_record(r);
    ASSERT_EQ(line.back(), '\n');
    ASSERT_EQ(std::count(line.begin(), line.end(), '\n'), 1);
    ASSERT_EQ(std::count(line.begin(), line.end(), '\t'), 7) << line;
    EXPECT_EQ(parse_record(std::string_view(line).substr(0, line.size() - 1)), r) << line;
  }
}

TEST(AuditFormat, FieldLayout) {
  AuditRecord r;
  r.timestamp = "T";
  r.profile = "r-base";
  r.operation = Operation::write;
  r.path = "/root/test";
  r.requested = AccessModeSet::write();
  EXPECT_EQ(format_record(r), "T\tr-base\t-\twrite\t/root/test\tw\tdenied\tdenied\n");
}

TEST(AuditLog, CorruptedLinesBecomeDiagnostics) {
  auto rng = testing::make_rng(41);
  std::string log;
  std::vector<AuditRecord> good;
  for (int i = 0; i < 20; ++i) {
    if (i == 7) {
      log += "this is not a record\n";
    } else if (i == 12) {
      log += "T\tp\t-\tfly\t/x\tr\tdenied\tdenied\n";
    } else {
      good.push_back(random_record(rng));
      log += format_record(good.back());
    }
  }
  const auto parsed = parse_log(log);
  EXPECT_EQ(parsed.records, good);
  ASSERT_EQ(parsed.diagnostics.size(), 2u);
  EXPECT_EQ(parsed.diagnostics[0].line, 8);
  EXPECT_EQ(parsed.diagnostics[1].line, 13);
}

TEST(AuditSinkTest, ConcurrentAppendsDoNotInterleave) {
  TempDir dir;
  const auto path = (dir.path() / "audit.log").string();
  auto sink = AuditSink::open(path);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      auto rng = testing::make_rng(100 + static_cast<std::uint64_t>(t));
      for (int i = 0; i < 250; ++i) {
        auto r = random_record(rng);
        r.timestamp.clear();
        r.path += std::string(static_cast<std::size_t>(rng() % 3000), 'p');
        sink.append(r);
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto parsed = parse_log(testing::read_file(path));
  EXPECT_TRUE(parsed.diagnostics.empty());
  EXPECT_EQ(parsed.records.size(), 2000u);
  for (const auto& r : parsed.records) EXPECT_FALSE(r.timestamp.empty());
}

TEST(Suggestions, GroupsAndSkipsGrantedModes) {
  const auto set = testing::parse_text("profile p { /etc/group r, }\n");
  std::vector<AuditRecord> recs;
  for (int i = 0; i < 3; ++i) {
    AuditRecord r;
    r.profile = "p";
    r.path = "/etc/passwd";
    r.requested = AccessModeSet::read();
    recs.push_back(r);
  }
  AuditRecord w;
  w.profile = "p";
  w.path = "/etc/group";
  w.operation = Operation::write;
  w.requested = AccessModeSet::parse("rw");
  recs.push_back(w);
  AuditRecord ghost = w;
  ghost.profile = "ghost";
  recs.push_back(ghost);
  const auto s = suggest_rules(recs, set);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].rule.pattern.source(), "/etc/passwd");
  EXPECT_EQ(s[0].evidence, 3u);
  EXPECT_EQ(s[1].rule.modes, AccessModeSet::write());
  const auto merged = apply_suggestions(set, s);
  EXPECT_TRUE(check_access(SubjectContext::confined("p"), merged, AccessRequest::read("/etc/passwd")).allowed);
  EXPECT_NE(format_suggestions(s).find("profile p {\n  /etc/passwd r,"), std::string::npos);
}

TEST(Suggestions, GeneralizeCollapsesSiblings) {
  const auto set = testing::parse_text("profile p { }\n");
  std::vector<AuditRecord> recs;
  for (const char* f : {"/data/a", "/data/b", "/data/c", "/other/x"}) {
    AuditRecord r;
    r.profile = "p";
    r.path = f;
    r.requested = AccessModeSet::read();
    recs.push_back(r);
  }
  SuggestOptions opts;
  opts.generalize = true;
  const auto s = suggest_rules(recs, set, opts);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].rule.pattern.source(), "/data/*");
  EXPECT_EQ(s[0].evidence, 3u);
}

TEST(Logprof, SuggestionsReplayWithoutDenials) {
  auto rng = testing::make_rng(42);
  const auto report = testing::run_logprof_roundtrip(rng, 50);
  EXPECT_TRUE(report.failure.empty()) << report.failure;
  EXPECT_EQ(report.scripts, 50);
  EXPECT_EQ(report.replay_denials, 0u);
  EXPECT_GT(report.suggestions, 50u);
}

}  // namespace
}  // namespace armorcage
