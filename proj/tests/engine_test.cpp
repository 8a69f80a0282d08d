#include <gtest/gtest.h>

#include "armorcage/engine.hpp"
#include "generators.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

using testing::corpus;
using testing::parse_text;

class Transcript : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { set_ = new ProfileSet(corpus()); }
  static void TearDownTestSuite() { delete set_; }

  static bool allows(const SubjectContext& ctx, const AccessRequest& req) {
    return check_access(ctx, *set_, req).allowed;
  }

  static ProfileSet* set_;
};

ProfileSet* Transcript::set_ = nullptr;

TEST_F(Transcript, TestprofileAndHat) {
  SubjectContext ctx = SubjectContext::confined("testprofile");
  EXPECT_TRUE(allows(ctx, AccessRequest::read("/etc/group")));
  EXPECT_FALSE(allows(ctx, AccessRequest::read("/etc/passwd")));

  const HatToken token{0x5eedULL};
  change_hat(ctx, *set_, "testhat", token);
  EXPECT_EQ(ctx.label(), "testprofile^testhat");
  EXPECT_FALSE(allows(ctx, AccessRequest::read("/etc/group")));
  EXPECT_FALSE(allows(ctx, AccessRequest::read("/etc/passwd")));

  revert_hat(ctx, token);
  EXPECT_FALSE(ctx.hat.has_value());
  EXPECT_TRUE(allows(ctx, AccessRequest::read("/etc/group")));

  change_hat(ctx, *set_, "testhat", token);
  EXPECT_THROW(revert_hat(ctx, HatToken{0x5eedULL + 1}), SecurityViolation);
  EXPECT_TRUE(ctx.poisoned);
  EXPECT_FALSE(allows(ctx, AccessRequest::read("/etc/group")));
  EXPECT_THROW(revert_hat(ctx, token), PolicyError);
}

TEST_F(Transcript, RBase) {
  const auto ctx = SubjectContext::confined("r-base");
  EXPECT_FALSE(allows(ctx, AccessRequest::write("/root/test")));
  EXPECT_FALSE(allows(ctx, AccessRequest::write("/home/alice/test")));
  EXPECT_TRUE(allows(ctx, AccessRequest{"/tmp/x/test.pdf", AccessModeSet::parse("rw"), Operation::write}));
  EXPECT_FALSE(allows(ctx, AccessRequest::list("/tmp/")));
}

TEST_F(Transcript, RUser) {
  const auto ctx = SubjectContext::confined("r-user");
  for (const char* home : {"/root", "/home/alice"}) {
    const std::string h = home;
    EXPECT_TRUE(allows(ctx, AccessRequest::write(h + "/R/x"))) << h;
    EXPECT_FALSE(allows(ctx, AccessRequest::read(h + "/Documents/x"))) << h;
  }
}

TEST_F(Transcript, ComplainModeLogsButAllows) {
  const auto complain = set_mode(*set_, "r-base", ProfileMode::complain);
  const auto d = check_access(SubjectContext::confined("r-base"), complain,
                              AccessRequest::read("/etc/passwd"));
  EXPECT_FALSE(d.allowed);
  EXPECT_TRUE(d.effective);
  ASSERT_TRUE(d.audit.has_value());
  EXPECT_EQ(d.audit->profile, "r-base");
  EXPECT_FALSE(d.audit->allowed);
  EXPECT_TRUE(d.audit->effective);
}

TEST_F(Transcript, DeniedRequestsCarryAuditRecord) {
  const auto d = check_access(SubjectContext::confined("r-base"), *set_, AccessRequest::read("/etc/passwd"));
  ASSERT_TRUE(d.audit.has_value());
  EXPECT_EQ(d.audit->path, "/etc/passwd");
  EXPECT_FALSE(d.audit->effective);
  const auto ok = check_access(SubjectContext::confined("r-base"), *set_, AccessRequest::read("/dev/null"));
  EXPECT_TRUE(ok.allowed);
  EXPECT_FALSE(ok.audit.has_value());
  EXPECT_FALSE(ok.matched.empty());
}

TEST(ChangeProfile, OneWay) {
  const auto set = parse_text(
      "profile jail { /x r, }\n"
      "profile gate { change_profile -> r-user, }\n"
      "profile r-user { /y r, }\n");
  try {
    change_profile(SubjectContext::confined("jail"), set, "r-user");
    FAIL();
  } catch (const PolicyError& e) {
    EXPECT_EQ(e.code(), PolicyErrc::denied_transition);
    EXPECT_STREQ(e.what(), "Failed to change profile from: jail to: r-user");
  }
  const auto moved = change_profile(SubjectContext::confined("gate"), set, "r-user");
  EXPECT_EQ(moved.profile, "r-user");
  EXPECT_THROW(change_profile(moved, set, "gate"), PolicyError);
  EXPECT_EQ(change_profile(SubjectContext::unconfined(), set, "jail").profile, "jail");
  EXPECT_THROW(change_profile(SubjectContext::unconfined(), set, "ghost"), PolicyError);
}

TEST(ExecTransitions, Modes) {
  const auto set = parse_text(
      "profile p {\n"
      "  /bin/inherit ix,\n  /bin/discrete px,\n  /usr/bin/helper cs,\n  /bin/free ux,\n"
      "  /bin/both ix,\n  /bin/b* px,\n  /bin/orphan px,\n"
      "  ^helper { /h r, }\n}\n"
      "/bin/discrete { /d r, }\n");
  const auto ctx = SubjectContext::confined("p");
  EXPECT_EQ(exec_transition(ctx, set, "/bin/inherit").context, ctx);
  EXPECT_EQ(exec_transition(ctx, set, "/bin/discrete").context.profile, "/bin/discrete");
  const auto hat = exec_transition(ctx, set, "/usr/bin/helper");
  EXPECT_EQ(hat.context.hat, "helper");
  EXPECT_TRUE(hat.context.token.has_value());
  const auto free = exec_transition(ctx, set, "/bin/free");
  EXPECT_TRUE(free.context.is_unconfined());
  ASSERT_TRUE(free.warning.has_value());
  EXPECT_EQ(free.warning->rfind("dangerous", 0), 0u);
  try {
    exec_transition(ctx, set, "/bin/both");
    FAIL();
  } catch (const PolicyError& e) {
    EXPECT_EQ(e.code(), PolicyErrc::conflicting_exec_modes);
  }
  try {
    exec_transition(ctx, set, "/bin/orphan");
    FAIL();
  } catch (const PolicyError& e) {
    EXPECT_EQ(e.code(), PolicyErrc::no_attached_profile);
  }
  EXPECT_THROW(exec_transition(ctx, set, "/bin/none"), PolicyError);
}

TEST(Hats, OnlyOwnRulesAndParentMode) {
  const auto set = parse_text("profile p flags=(complain) { /a r, ^h { /b r, } }");
  SubjectContext ctx = SubjectContext::confined("p");
  change_hat(ctx, set, "h", HatToken{7});
  const auto d = check_access(ctx, set, AccessRequest::read("/a"));
  EXPECT_FALSE(d.allowed);
  EXPECT_TRUE(d.effective);
  EXPECT_TRUE(check_access(ctx, set, AccessRequest::read("/b")).allowed);
  EXPECT_THROW(change_hat(ctx, set, "h", HatToken{8}), PolicyError);
}

TEST(Modes, DisabledAndUnconfined) {
  const auto set = parse_text("profile p flags=(disabled) { }");
  const auto d = check_access(SubjectContext::confined("p"), set, AccessRequest::read("/x"));
  EXPECT_TRUE(d.allowed);
  EXPECT_TRUE(d.matched.empty());
  EXPECT_TRUE(check_access(SubjectContext::unconfined(), set, AccessRequest::write("/x")).allowed);
}

TEST(Capabilities, Lookup) {
  const auto set = corpus();
  EXPECT_TRUE(check_capability(SubjectContext::confined("r-user"), set, "kill"));
  EXPECT_FALSE(check_capability(SubjectContext::confined("r-user"), set, "sys_admin"));
  EXPECT_FALSE(check_capability(SubjectContext::confined("r-base"), set, "kill"));
}

TEST(Oracle, CheckAccessMatchesEnumeration) {
  auto rng = testing::make_rng(20);
  const auto report = testing::run_engine_oracle(rng, 400);
  EXPECT_TRUE(report.mismatch.empty()) << report.mismatch << "\nseed " << testing::test_seed();
  EXPECT_GE(report.cases, 10000u);
}

}  // namespace
}  // namespace armorcage
