#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ptower/dbar.hpp"
#include "ptower/errors.hpp"
#include "ptower/rng.hpp"

using namespace ptower;

namespace {

BlockDistribution random_distribution(Rng& rng, std::size_t L, std::uint64_t alphabet, double zero_fraction) {
  const BlockCodec codec(L, alphabet);
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < L; ++i) space *= alphabet;
  std::vector<std::pair<std::uint64_t, double>> entries;
  double total = 0;
  for (std::uint64_t key = 0; key < space; ++key) {
    if (uniform01(rng) < zero_fraction) continue;
    const double w = uniform01(rng);
    entries.emplace_back(key, w);
    total += w;
  }
  if (entries.empty()) entries.emplace_back(0, total = 1.0);
  for (auto& e : entries) e.second /= total;
  return BlockDistribution::from_masses(L, alphabet, std::move(entries));
}

std::vector<double> dense_mass(const BlockDistribution& P, std::uint64_t space) {
  std::vector<double> out(space, 0.0);
  for (std::size_t i = 0; i < P.keys.size(); ++i) out[P.keys[i]] = P.mass[i];
  return out;
}

// Kantorovich-Rubinstein dual with integer potentials f: blocks -> {0..L},
// |f(x) - f(y)| <= Hamming count. The metric is a graph metric, so integer
// potentials attain the optimum.
double kr_dual(const BlockDistribution& P, const BlockDistribution& Q) {
  const auto codec = P.codec();
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < P.L; ++i) space *= P.alphabet;
  const auto p = dense_mass(P, space), q = dense_mass(Q, space);
  std::vector<int> f(space, 0);
  double best = 0.0;
  const int top = static_cast<int>(P.L);
  while (true) {
    bool lipschitz = true;
    for (std::uint64_t x = 0; x < space && lipschitz; ++x) {
      for (std::uint64_t y = x + 1; y < space; ++y) {
        if (std::abs(f[x] - f[y]) > static_cast<int>(codec.distance(x, y))) {
          lipschitz = false;
          break;
        }
      }
    }
    if (lipschitz) {
      double v = 0;
      for (std::uint64_t x = 0; x < space; ++x) v += f[x] * (p[x] - q[x]);
      best = std::max(best, v);
    }
    std::uint64_t i = 0;
    while (i < space && f[i] == top) f[i++] = 0;
    if (i == space) break;
    ++f[i];
  }
  return best / static_cast<double>(P.L);
}

// Image of P under coordinatewise saturation at ell.
BlockDistribution saturate(const BlockDistribution& P, std::uint32_t ell) {
  const auto codec = P.codec();
  const BlockCodec out(P.L, ell + 1);
  std::vector<std::pair<std::uint64_t, double>> entries;
  for (std::size_t i = 0; i < P.keys.size(); ++i) {
    auto block = codec.decode(P.keys[i]);
    for (auto& v : block) v = std::min(v, ell);
    entries.emplace_back(out.encode(block), P.mass[i]);
  }
  return BlockDistribution::from_masses(P.L, ell + 1, std::move(entries));
}

BlockDistribution iid_bernoulli(std::size_t L, double p) {
  std::vector<std::pair<std::uint64_t, double>> entries;
  for (std::uint64_t key = 0; key < (std::uint64_t{1} << L); ++key) {
    const int ones = __builtin_popcountll(key);
    entries.emplace_back(key, std::pow(p, ones) * std::pow(1 - p, static_cast<double>(L) - ones));
  }
  return BlockDistribution::from_masses(L, 2, std::move(entries));
}

}  // namespace

TEST(Hamming, Examples) {
  const Block a{0, 1, 2, 3}, b{0, 1, 0, 0}, c{1};
  EXPECT_DOUBLE_EQ(hamming(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hamming(a, b), 0.5);
  EXPECT_THROW(hamming(a, c), DomainError);
}

TEST(Codec, RoundTripAndDistance) {
  const BlockCodec codec(3, 7);
  const Block x{6, 0, 3};
  const auto key = codec.encode(x);
  EXPECT_EQ(key, 6u * 49 + 3);
  EXPECT_EQ(codec.decode(key), x);
  EXPECT_EQ(codec.digit(key, 2), 3u);
  EXPECT_EQ(codec.distance(key, codec.encode(Block{6, 1, 3})), 1u);
  EXPECT_THROW(codec.encode(Block{7, 0, 0}), DomainError);
  EXPECT_THROW(BlockCodec(40, 7), BudgetError);
}

TEST(Distribution, FromMassesMergesAndValidates) {
  const auto P = BlockDistribution::from_masses(1, 3, {{2, 0.25}, {0, 0.5}, {2, 0.25}, {1, 0.0}});
  EXPECT_EQ(P.keys, (std::vector<std::uint64_t>{0, 2}));
  EXPECT_EQ(P.mass, (std::vector<double>{0.5, 0.5}));
  EXPECT_NO_THROW(P.validate());
  const auto bad = BlockDistribution::from_masses(1, 3, {{0, 0.5}});
  EXPECT_THROW(bad.validate(), DomainError);
  const auto S = BlockDistribution::from_samples(1, 3, {2, 0, 2, 2});
  EXPECT_TRUE(S.empirical());
  EXPECT_EQ(S.counts, (std::vector<std::uint64_t>{1, 3}));
  EXPECT_DOUBLE_EQ(S.mass[1], 0.75);
}

TEST(DbarExact, IdentityAndPointMasses) {
  Rng rng(1);
  const auto P = random_distribution(rng, 3, 3, 0.3);
  const auto same = dbar_L_exact(P, P);
  EXPECT_EQ(same.value, 0.0);
  EXPECT_EQ(same.solver, "identity");

  const auto zeros = BlockDistribution::from_masses(2, 2, {{0, 1.0}});
  const auto ones = BlockDistribution::from_masses(2, 2, {{3, 1.0}});
  EXPECT_NEAR(dbar_L_exact(zeros, ones).value, 1.0, 1e-15);

  // Fair coin against the constant 0 on one symbol.
  const auto fair = BlockDistribution::from_masses(1, 2, {{0, 0.5}, {1, 0.5}});
  const auto zero = BlockDistribution::from_masses(1, 2, {{0, 1.0}});
  EXPECT_NEAR(dbar_L_exact(fair, zero).value, 0.5, 1e-15);
  EXPECT_THROW(dbar_L_exact(fair, zeros), DomainError);
}

TEST(DbarExact, MatchesKantorovichDual) {
  Rng rng(2);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t L = trial % 2 == 0 ? 2 : 3;
    const auto P = random_distribution(rng, L, 2, 0.2);
    const auto Q = random_distribution(rng, L, 2, 0.2);
    EXPECT_NEAR(dbar_L_exact(P, Q).value, kr_dual(P, Q), 1e-12) << "trial " << trial;
  }
}

TEST(DbarExact, RoutesAgreeAndPlansAreCouplings) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto P = random_distribution(rng, 4, 3, 0.5);
    const auto Q = random_distribution(rng, 4, 3, 0.5);
    const auto dense = dbar_L_exact(P, Q, DbarRoute::Dense);
    const auto patterns = dbar_L_exact(P, Q, DbarRoute::Patterns);
    EXPECT_EQ(dense.solver, "dense");
    EXPECT_EQ(patterns.solver, "patterns");
    EXPECT_NEAR(dense.value, patterns.value, 1e-12);
    EXPECT_NEAR(dense.plan.cost(), dense.value, 1e-12);
    EXPECT_NEAR(patterns.plan.cost(), patterns.value, 1e-12);
    EXPECT_LE(dense.plan.marginal_error(P, Q), 1e-9);
    EXPECT_LE(patterns.plan.marginal_error(P, Q), 1e-9);
  }
}

TEST(DbarExact, MetricAxioms) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto P = random_distribution(rng, 2, 3, 0.3);
    const auto Q = random_distribution(rng, 2, 3, 0.3);
    const auto R = random_distribution(rng, 2, 3, 0.3);
    const double pq = dbar_L_exact(P, Q).value;
    EXPECT_NEAR(pq, dbar_L_exact(Q, P).value, 1e-12);
    EXPECT_LE(pq, dbar_L_exact(P, R).value + dbar_L_exact(R, Q).value + 1e-12);
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
  }
}

TEST(DbarExact, IidProcessesDoNotDependOnBlockLength) {
  for (std::size_t L = 1; L <= 5; ++L) {
    EXPECT_NEAR(dbar_L_exact(iid_bernoulli(L, 0.3), iid_bernoulli(L, 0.5)).value, 0.2, 1e-12) << "L=" << L;
  }
}

TEST(DbarExact, SaturationIsAContraction) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto P = random_distribution(rng, 2, 4, 0.4);
    const auto Q = random_distribution(rng, 2, 4, 0.4);
    EXPECT_LE(dbar_L_exact(saturate(P, 1), saturate(Q, 1)).value, dbar_L_exact(P, Q).value + 1e-12);
  }
}

TEST(DbarExact, IntegerRouteForEmpiricalCounts) {
  const auto A = BlockDistribution::from_samples(2, 2, {0, 0, 1, 3});
  const auto B = BlockDistribution::from_samples(2, 2, {3, 3, 3});
  // A: 00 w.p. 1/2, 01 w.p. 1/4, 11 w.p. 1/4; B: 11. Expected Hamming 1/2*1 + 1/4*1/2.
  EXPECT_NEAR(dbar_L_exact(A, B).value, 0.625, 1e-15);
}

TEST(PlanCsv, Layout) {
  TransportPlan plan;
  plan.L = 2;
  plan.alphabet = 3;
  plan.entries = {{5, 7, 0.25}};
  EXPECT_EQ(plan.to_csv().substr(0, 17), "blockA,blockB,mas");
  EXPECT_NE(plan.to_csv().find("1:2,2:1,0.25"), std::string::npos);
}

TEST(Harvest, SaturatesAndSlides) {
  const std::vector<std::uint32_t> v{0, 3, 7, 1};
  EXPECT_EQ(harvest_blocks(v, 2, 3), (std::vector<std::uint64_t>{3, 15, 13}));
  EXPECT_TRUE(harvest_blocks(v, 5, 3).empty());
}

TEST(Truncate, Pointwise) {
  CountWindow w;
  w.values = {0, 3, 7};
  EXPECT_EQ(truncate(w, 3).values, (std::vector<std::uint32_t>{0, 3, 3}));
}

TEST(DbarEmpirical, SameSampleAndFloor) {
  const auto x = sample_xi0({0, 20999}, 5);
  const auto r = dbar_L_empirical(x, x, 3, 6);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.blocks_a, 20998u);
  EXPECT_THROW(dbar_L_empirical(x, x, 3, 6, 30000), InsufficientSampleError);
}

TEST(DbarEmpirical, IndependentXi0SamplesAreClose) {
  const auto a = sample_xi0({0, 100003}, 11);
  const auto b = sample_xi0({0, 100003}, 12);
  const auto r = dbar_L_empirical(a, b, 4, 6);
  EXPECT_GT(r.value, 0.0);
  EXPECT_LT(r.value, 0.03);
  EXPECT_EQ(r.L, 4u);
}

TEST(ConditionalBound, ThreeEpsilon) {
  EXPECT_DOUBLE_EQ(dbar_upper_conditional(0.0, 0.0).bound, 0.0);
  EXPECT_NEAR(dbar_upper_conditional(0.05, 0.01).bound, 0.15, 1e-15);
  EXPECT_NEAR(dbar_upper_conditional(0.01, 0.05).epsilon, 0.05, 1e-15);
}
