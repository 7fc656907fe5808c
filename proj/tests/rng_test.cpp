#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "ptower/rng.hpp"

using namespace ptower;

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, SameKeySameStream) {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 1000; ++i) {
    xa.push_back(a());
    xb.push_back(b());
    xc.push_back(c());
  }
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
  EXPECT_EQ(a.key(), 42u);
}

TEST(Philox, WorksWithStandardDistributions) {
  Rng rng(7);
  std::poisson_distribution<int> poisson(1.0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += poisson(rng);
  EXPECT_NEAR(sum / n, 1.0, 0.01);
}

TEST(Philox, Uniform01InRangeWithCorrectMean) {
  Rng rng(11);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(SeedSplit, Deterministic) {
  EXPECT_EQ(seed_split(5, {"a", "b"}), seed_split(5, {"a", "b"}));
  EXPECT_EQ(seed_split(5, std::vector<std::string>{"a", "b"}), seed_split(5, {"a", "b"}));
  EXPECT_EQ(seed_split(5, "x", 9), seed_split(5, "x", 9));
}

TEST(SeedSplit, PathBoundariesMatter) {
  EXPECT_NE(seed_split(5, {"ab", "c"}), seed_split(5, {"a", "bc"}));
  EXPECT_NE(seed_split(5, {"a"}), seed_split(5, {"a", ""}));
  EXPECT_NE(seed_split(5, {"a"}), seed_split(6, {"a"}));
}

TEST(SeedSplit, MillionIndexedSiblingsDistinct) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(1'000'000);
  for (std::uint64_t i = 0; i < 1'000'000; ++i) seeds.push_back(seed_split(123, "replicate", i));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
}

TEST(SeedSplit, MillionLabelledSiblingsDistinct) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) seeds.push_back(seed_split(123, {"run", std::to_string(i)}));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
}
