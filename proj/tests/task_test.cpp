#include <gtest/gtest.h>

#include <sys/resource.h>

#include "armorcage/path.hpp"
#include "armorcage/task.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

using testing::TempDir;

TEST(TaskFormat, TextRoundTrip) {
  const auto script = parse_task_text(
      "# demo\n"
      "read /etc/group\n"
      "write /tmp/out \"6869\"\n"
      "list /tmp/\n"
      "exec /bin/echo \"two words\" x\n"
      "alloc 1024\nburn 0.5\nforkn 3\nforkn unbounded\nsleep 0.1\n"
      "scan ~/Documents \"([0-9]{4}[- ]){3}[0-9]{4}\" 1000000\n"
      "emit 0a\n");
  ASSERT_EQ(script.steps.size(), 11u);
  EXPECT_EQ(std::get<step::Exec>(script.steps[3]).args,
            (std::vector<std::string>{"two words", "x"}));
  EXPECT_EQ(std::get<step::WriteFile>(script.steps[1]).bytes, "hi");
  EXPECT_FALSE(std::get<step::ForkN>(script.steps[7]).budget.has_value());
  EXPECT_EQ(parse_task_text(to_task_text(script)), script);
  EXPECT_EQ(parse_task_json(to_task_json(script)), script);
  EXPECT_EQ(parse_task(to_task_json(script)), script);
}

TEST(TaskFormat, ErrorsCarryLineNumbers) {
  try {
    parse_task_text("read /x\nfrobnicate\n");
    FAIL();
  } catch (const TaskError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_task_text("alloc lots\n"), TaskError);
  EXPECT_THROW(parse_task_text("\n# only comments\n"), TaskError);
  EXPECT_THROW(parse_task_json("{\"steps\": [{\"op\": \"read\"}]}"), TaskError);
}

TEST(TaskFormat, FixturesMatchShippedFiles) {
  for (const auto& name : builtin_fixture_names()) {
    const auto file = testing::task_dir() / (name + ".task");
    ASSERT_TRUE(std::filesystem::exists(file)) << file;
    EXPECT_EQ(parse_task(testing::read_file(file)), builtin_fixture(name)) << name;
  }
  const auto mem = builtin_fixture("memtest");
  EXPECT_EQ(std::get<step::AllocBytes>(mem.steps[0]).bytes, kMemtestBytes);
  EXPECT_THROW(builtin_fixture("nope"), Error);
}

TEST(TaskPaths, HomeExpansion) {
  EXPECT_EQ(expand_task_path("/a//b/../c"), "/a/c");
  const std::string home = expand_task_path("~");
  EXPECT_EQ(home.front(), '/');
  EXPECT_EQ(expand_task_path("~/Documents"), normalize_path(home + "/Documents"));
}

TEST(TaskRun, SimulationFollowsEngine) {
  const auto set = testing::corpus();
  const auto script = parse_task_text("read /etc/group\nread /etc/passwd\n");
  RunOptions opts;
  opts.mode = RunMode::simulate;
  const auto out = run_task(script, SubjectContext::confined("testprofile"), set, opts);
  EXPECT_EQ(out.status, TaskStatus::denied);
  ASSERT_EQ(out.trace.size(), 2u);
  EXPECT_TRUE(out.trace[0].allowed);
  EXPECT_FALSE(out.trace[1].allowed);
  ASSERT_EQ(out.audit.size(), 1u);
  EXPECT_EQ(out.audit[0].path, "/etc/passwd");
  EXPECT_NE(out.report.find("missing r"), std::string::npos) << out.report;
  EXPECT_NE(out.payload.find("root"), std::string::npos);
}

TEST(TaskRun, ComplainModeKeepsGoing) {
  const auto set = set_mode(testing::corpus(), "testprofile", ProfileMode::complain);
  const auto script = parse_task_text("read /etc/passwd\nwrite /nonexistent/x 00\nexec /bin/true\n");
  RunOptions opts;
  opts.mode = RunMode::simulate;
  const auto out = run_task(script, SubjectContext::confined("testprofile"), set, opts);
  EXPECT_EQ(out.status, TaskStatus::ok) << out.report;
  EXPECT_EQ(out.audit.size(), 3u);
  for (const auto& r : out.audit) {
    EXPECT_FALSE(r.allowed);
    EXPECT_TRUE(r.effective);
  }
}

TEST(TaskRun, ScanFindsCardsInAllowedTree) {
  TempDir dir;
  dir.write("docs/a.txt", "nothing\ncard 1234-5678-9012-3456 here\n");
  dir.write("docs/sub/b.txt", "4111 1111 1111 1111\n");
  dir.write("docs/big.bin", std::string(2000, 'x') + "1234-5678-9012-3456");
  const std::string root = dir.path().string() + "/docs";
  const auto found = scan_pattern(root, kCreditCardRegex, 1000, SubjectContext::unconfined(), {});
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0].match, "1234-5678-9012-3456");
  EXPECT_EQ(found[1].match, "4111 1111 1111 1111");

  const auto set = testing::parse_text("profile scan { " + root + "/ r, " + root + "/*.txt r, }");
  EXPECT_THROW(scan_pattern(root, kCreditCardRegex, 1000, SubjectContext::confined("scan"), set),
               AccessDenied);
}

TEST(TaskRun, RUserCannotScanDocuments) {
  const auto set = testing::corpus();
  RunOptions opts;
  opts.mode = RunMode::simulate;
  const auto out = run_task(builtin_fixture("find_credit_cards"), SubjectContext::confined("r-user"), set, opts);
  EXPECT_EQ(out.status, TaskStatus::denied) << out.report;
}

TEST(TaskRun, AllocFailureMessage) {
  const auto outcome = testing::run_in_child([](std::string& msg) {
    const rlimit lim{10 << 20, 10 << 20};
    ::setrlimit(RLIMIT_AS, &lim);
    const auto out = run_task(builtin_fixture("memtest"), SubjectContext::unconfined(), {});
    if (out.status != TaskStatus::error) msg = "allocation succeeded";
    if (out.report.find("cannot allocate vector of size 76.3 Mb") == std::string::npos) {
      msg += "report: " + out.report;
    }
    return msg.empty() ? 0 : 1;
  });
  EXPECT_TRUE(outcome.ok()) << outcome.message;
}

TEST(TaskRun, UnboundedForkNeedsALimit) {
  const auto outcome = testing::run_in_child(
      [](std::string& msg) {
        const auto out = run_task(builtin_fixture("forkbomb"), SubjectContext::unconfined(), {});
        if (out.status != TaskStatus::error || out.report.find("refusing") == std::string::npos) {
          msg = "unbounded loop was not refused: " + out.report;
        }
        return msg.empty() ? 0 : 1;
      },
      false);
  EXPECT_TRUE(outcome.ok()) << outcome.message;
}

TEST(TaskRun, ExecCollectsOutputAndEmitsUxAudit) {
  const auto set = testing::parse_text("profile e { /bin/echo ux, /usr/bin/echo ux, }");
  const auto out = run_task(parse_task_text("exec /bin/echo hello\n"), SubjectContext::confined("e"), set);
  EXPECT_EQ(out.status, TaskStatus::ok) << out.report;
  EXPECT_EQ(out.payload, "hello\n");
  ASSERT_EQ(out.audit.size(), 1u);
  EXPECT_TRUE(out.audit[0].allowed);
  EXPECT_TRUE(out.final_context.is_unconfined());
}

}  // namespace
}  // namespace armorcage
