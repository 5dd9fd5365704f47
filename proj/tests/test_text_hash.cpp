#include <gtest/gtest.h>

#include "vll/hash.hpp"
#include "vll/text.hpp"

using namespace vll;

// Vectors from coreutils sha256sum.
TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex("DEL->DXB"), "99898255c818e2bb0c783a81530196af8c672e708c479e4458aa680aadb7b921");
}

TEST(Sha256, U64IsLeadingDigestBytes) {
  // ba7816bf8f01cfea big-endian
  EXPECT_EQ(sha256_u64("abc"), 0xba7816bf8f01cfeaULL);
}

TEST(Text, FormatNumberShortest) {
  EXPECT_EQ(text::format_number(500.0), "500");
  EXPECT_EQ(text::format_number(0.0), "0");
  EXPECT_EQ(text::format_number(-0.0), "0");
  EXPECT_EQ(text::format_number(77.1), "77.1");
  EXPECT_EQ(text::format_number(-118.4085), "-118.4085");
  EXPECT_EQ(text::format_number(0.1 + 0.2), "0.30000000000000004");
}

TEST(Text, ParseNumber) {
  EXPECT_EQ(text::parse_number("500"), 500.0);
  EXPECT_EQ(text::parse_number(" 2.5 "), 2.5);
  EXPECT_EQ(text::parse_number("+3"), 3.0);
  EXPECT_FALSE(text::parse_number(""));
  EXPECT_FALSE(text::parse_number("12x"));
  EXPECT_FALSE(text::parse_number("nan"));
  EXPECT_FALSE(text::parse_number("inf"));
}

TEST(Text, EditDistance) {
  EXPECT_EQ(text::edit_distance("XYZ", "XYZ"), 0u);
  EXPECT_EQ(text::edit_distance("DXB", "DEL"), 2u);
  EXPECT_EQ(text::edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(text::edit_distance("", "abc"), 3u);
}

TEST(Text, SplitJoinTrim) {
  auto parts = text::split("a|b||c", '|');
  ASSERT_EQ(parts.size(), 4u);
  EXPECT_EQ(parts[2], "");
  EXPECT_EQ(text::join(parts, ","), "a,b,,c");
  EXPECT_EQ(text::trim("  x \t"), "x");
  EXPECT_EQ(text::upper("del"), "DEL");
}
