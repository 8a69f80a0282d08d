#include <gtest/gtest.h>

#include <regex>

#include "armorcage/sanitize.hpp"
#include "testing.hpp"

namespace armorcage {
namespace {

bool is_alnum_ascii(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

TEST(Sanitize, DerivedExample) {
  EXPECT_EQ(sanitize_identifier("speed&dist;system(\"whoami\")"), "speeddistsystemwhoami");
  EXPECT_EQ(sanitize_identifier(""), "");
  EXPECT_EQ(sanitize_identifier("r\xc3\xa9sum\xc3\xa9"), "rsum");
}

TEST(Sanitize, RandomStrings) {
  const std::regex safe("^[a-zA-Z0-9]*$");
  auto rng = testing::make_rng(50);
  for (int i = 0; i < 10000; ++i) {
    std::string in(rng() % 64, '\0');
    for (auto& c : in) c = static_cast<char>(rng() % 256);
    const auto out = sanitize_identifier(in);
    ASSERT_TRUE(std::regex_match(out, safe));
    std::string expected;
    for (char c : in) {
      if (is_alnum_ascii(c)) expected += c;
    }
    ASSERT_EQ(out, expected);
    ASSERT_EQ(sanitize_identifier(out), out);
  }
}

}  // namespace
}  // namespace armorcage
