#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ptower/errors.hpp"
#include "ptower/lemma.hpp"
#include "ptower/stats.hpp"

using namespace ptower;

namespace {

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(p, k) *
         std::pow(1 - p, n - k);
}

LemmaParams simple(double delta, std::uint64_t M, std::uint64_t k) {
  LemmaParams p;
  p.delta = delta;
  p.M = M;
  p.k = k;
  return p;
}

}  // namespace

TEST(ClosedForms, NoFreeProbability) {
  EXPECT_NEAR(no_free_probability(3, 100, 2.0), std::exp(-0.06), 1e-15);
  EXPECT_DOUBLE_EQ(no_free_probability(0, 100, 2.0), 1.0);
  EXPECT_THROW(no_free_probability(5, 3, 2.0), DomainError);
}

TEST(ClosedForms, ParamSumStats) {
  const auto s = param_sum_stats(4, 2.0);
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_NEAR(s.variance, 25.0 / 48.0, 1e-15);
  EXPECT_NEAR(harmonic_number(4), 25.0 / 12.0, 1e-15);
  EXPECT_DOUBLE_EQ(harmonic_number(0), 0.0);
}

TEST(Convolution, BernoulliSumMatchesBinomial) {
  const std::vector<double> p(12, 0.3);
  const auto law = bernoulli_sum_law(p);
  ASSERT_EQ(law.size(), 13u);
  for (int k = 0; k <= 12; ++k) EXPECT_NEAR(law[k], binomial_pmf(12, k, 0.3), 1e-14);
  EXPECT_THROW(bernoulli_sum_law(std::vector<double>{1.5}), DomainError);
}

TEST(Convolution, ConditionalWhiteLaw) {
  const std::vector<std::uint32_t> F{1, 0, 2};  // one certain white plus two Bernoulli(1/3)
  const auto law = conditional_white_law(F);
  ASSERT_EQ(law.size(), 4u);
  EXPECT_NEAR(law[0], 0.0, 1e-15);
  EXPECT_NEAR(law[1], 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(law[2], 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(law[3], 1.0 / 9.0, 1e-15);
}

TEST(Convolution, L1ToPoissonOfPointMass) {
  for (double lambda : {0.1, 1.0, 3.0}) {
    const std::vector<double> at_zero{1.0};
    EXPECT_NEAR(l1_to_poisson(at_zero, lambda), 2.0 * (1.0 - std::exp(-lambda)), 1e-12);
  }
}

TEST(Convolution, LeCamSingleBernoulli) {
  const double p = 0.2;
  const std::vector<double> ps{p};
  const auto g = lecam_gap(ps);
  const double e = std::exp(-p);
  const double exact = std::abs(1 - p - e) + std::abs(p - p * e) + (1 - e - p * e);
  EXPECT_DOUBLE_EQ(g.lambda, p);
  EXPECT_NEAR(g.exact_l1, exact, 1e-12);
  EXPECT_DOUBLE_EQ(g.bound, 2 * p * p);
  EXPECT_LE(g.exact_l1, g.bound);
}

TEST(Joining, ValidationAndMarginals) {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  const auto j = LabelJoining::from_matrix(2, 2, probs);
  EXPECT_NO_THROW(j.validate());
  const auto b = j.black_marginal();
  const auto w = j.white_marginal();
  EXPECT_NEAR(b[0], 0.3, 1e-15);
  EXPECT_NEAR(b[1], 0.7, 1e-15);
  EXPECT_NEAR(w[0], 0.4, 1e-15);
  EXPECT_NEAR(w[1], 0.6, 1e-15);
  const std::vector<double> bad{0.5, 0.2, 0.3, 0.4};
  EXPECT_THROW(LabelJoining::from_matrix(2, 2, bad).validate(), DomainError);
}

TEST(Sampling, XiMarginalsArePoisson) {
  const auto p = simple(2.0, 5, 20);
  const auto xi = sample_xi(p, {0, 99999}, 17);
  const auto black = xi.black_totals();
  const auto white = xi.white_totals();
  EXPECT_TRUE(stats::poisson_gof(black, 1.0).passes(0.001));
  EXPECT_TRUE(stats::poisson_gof(white, 1.0).passes(0.001));
  EXPECT_FALSE(xi.has_links());
}

TEST(Sampling, ZetaLinksRespectLengthAndLabels) {
  auto p = simple(1.0, 3, 7);
  const std::vector<double> probs{0.25, 0.25, 0.0, 0.5};
  p.joining = LabelJoining::from_matrix(2, 2, probs);
  const auto zeta = sample_zeta(p, {0, 19999}, 5, true);
  ASSERT_TRUE(zeta.has_links());
  ASSERT_FALSE(zeta.links().empty());
  for (const auto& l : zeta.links()) {
    const auto len = l.white_site - l.black_site;
    EXPECT_GE(len, 3);
    EXPECT_LE(len, 9);
    EXPECT_FALSE(l.black_label == 1 && l.white_label == 0);
  }
  const auto whites = zeta.white_totals();
  EXPECT_TRUE(stats::poisson_gof(whites, 0.5).passes(0.001));
  const auto comp = component_counts(zeta, 1, 1);
  EXPECT_EQ(comp.black.size(), static_cast<std::size_t>(20000));
}

TEST(Sampling, SameSeedSameSample) {
  const auto p = simple(2.0, 2, 4);
  const auto a = sample_zeta(p, {-50, 50}, 3);
  const auto b = sample_zeta(p, {-50, 50}, 3);
  EXPECT_EQ(a.black_totals(), b.black_totals());
  EXPECT_EQ(a.white_totals(), b.white_totals());
}

TEST(EnrichedPast, Invariants) {
  const auto p = simple(2.0, 4, 6);
  std::vector<double> sum(6, 0.0);
  const std::size_t reps = 20000;
  for_each_enriched_past(p, 30, reps, 8, [&](std::size_t, const FreeCounts& fc) {
    ASSERT_EQ(fc.F.size(), 6u);
    EXPECT_EQ(fc.free_left, 0u);
    EXPECT_EQ(fc.F[5], fc.blacks[5]);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_LE(fc.F[j], fc.blacks[j]);
  });
  // Sequential accumulation: the callback may run on several threads.
  std::vector<std::vector<std::uint32_t>> F(6, std::vector<std::uint32_t>(reps));
  for_each_enriched_past(p, 30, reps, 8, [&](std::size_t r, const FreeCounts& fc) {
    for (std::size_t j = 0; j < 6; ++j) F[j][r] = fc.F[j];
  });
  for (std::size_t j = 0; j < 6; ++j) {
    const double lambda = (j + 1) / 6.0;  // delta/2 * j/k
    const auto m = stats::moments(F[j]);
    EXPECT_TRUE(stats::within_sigma(m.mean, lambda, m.std_error(), 4.0)) << "j=" << j + 1;
  }
  EXPECT_THROW(for_each_enriched_past(p, 9, 1, 0, [](std::size_t, const FreeCounts&) {}), DomainError);
}

TEST(Criterion, CommonEpsilon) {
  const std::vector<double> v{0.5, 0.1, 0.05, 0.01};
  EXPECT_DOUBLE_EQ(common_epsilon(v), 0.25);
  const std::vector<double> zeros(10, 0.0);
  EXPECT_DOUBLE_EQ(common_epsilon(zeros), 0.0);
}

TEST(Criterion, EstimateIsConsistent) {
  const auto p = simple(2.0, 5, 200);
  const auto est = conditional_criterion_estimate(p, 1000, 0.1, 500, 21);
  ASSERT_EQ(est.l1.size(), 500u);
  std::size_t bad = 0;
  double max_good = 0.0;
  for (double v : est.l1) {
    if (v >= 0.1) ++bad;
    else max_good = std::max(max_good, v);
  }
  EXPECT_DOUBLE_EQ(est.bad_mass, bad / 500.0);
  EXPECT_DOUBLE_EQ(est.max_l1_good, max_good);
  EXPECT_DOUBLE_EQ(est.common_epsilon, common_epsilon(est.l1));
  EXPECT_LT(est.common_epsilon, 0.3);
}
