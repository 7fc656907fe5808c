// Goodness-of-fit and moment helpers shared by tests, experiments and the
// acceptance suite.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ptower::stats {

struct GofResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t bins = 0;

  bool passes(double alpha) const { return p_value >= alpha; }
};

/// Pearson chi-square of observed counts against expected counts.
/// Bins whose expected count falls below `min_expected` are merged with
/// their right neighbour (the final bin merges left).
GofResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                         double min_expected = 5.0, int fitted_params = 0);

/// Chi-square goodness of fit of integer samples against Poisson(lambda);
/// the right tail is lumped into the last bin.
GofResult poisson_gof(std::span<const std::uint32_t> samples, double lambda);

/// Chi-square test of homogeneity between two samples of categorical keys.
/// Categories too rare for the asymptotics are pooled into one bin.
GofResult two_sample_chi_square(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                double min_expected = 5.0);

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased

  double std_error() const;
  /// Standard error of the sample variance, from the fourth central moment.
  double variance_std_error = 0.0;
};

Moments moments(std::span<const double> xs);
Moments moments(std::span<const std::uint32_t> xs);

/// Lag-h sample autocovariance (biased normalisation).
double autocovariance(std::span<const std::uint32_t> xs, std::size_t lag);
/// Sample cross-covariance cov(x_t, y_{t+lag}).
double cross_covariance(std::span<const std::uint32_t> x, std::span<const std::uint32_t> y,
                        std::size_t lag);

/// |observed - expected| <= z * sigma.
inline bool within_sigma(double observed, double expected, double sigma, double z = 3.0) {
  const double diff = observed > expected ? observed - expected : expected - observed;
  return diff <= z * sigma;
}

/// Poisson probability mass e^{-lambda} lambda^k / k!.
double poisson_pmf(double lambda, std::uint64_t k);
/// P(X > k) for X ~ Poisson(lambda).
double poisson_upper_tail(double lambda, std::uint64_t k);

/// Smallest t with P(X > t) < tol for X ~ Poisson(lambda).
std::uint64_t poisson_truncation_point(double lambda, double tol = 1e-12);

}  // namespace ptower::stats
