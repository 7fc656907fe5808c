#include "ptower/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace ptower::stats {

GofResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                         double min_expected, int fitted_params) {
  if (observed.size() != expected.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
  std::vector<double> obs, exp;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_o += observed[i];
    acc_e += expected[i];
    if (acc_e >= min_expected) {
      obs.push_back(acc_o);
      exp.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (exp.empty()) {
      obs.push_back(acc_o);
      exp.push_back(acc_e);
    } else {
      obs.back() += acc_o;
      exp.back() += acc_e;
    }
  }
  GofResult r;
  r.bins = exp.size();
  for (std::size_t i = 0; i < exp.size(); ++i) {
    if (exp[i] <= 0.0) continue;
    const double d = obs[i] - exp[i];
    r.statistic += d * d / exp[i];
  }
  r.dof = static_cast<int>(r.bins) - 1 - fitted_params;
  if (r.dof <= 0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

GofResult poisson_gof(std::span<const std::uint32_t> samples, double lambda) {
  if (samples.empty()) throw std::invalid_argument("poisson_gof: no samples");
  const auto n = static_cast<double>(samples.size());
  std::uint32_t max_seen = 0;
  for (auto v : samples) max_seen = std::max(max_seen, v);
  // Enough bins that the lumped tail is negligible, plus every observed value.
  const std::uint64_t top = std::max<std::uint64_t>(max_seen, poisson_truncation_point(lambda, 1e-9)) + 1;
  std::vector<double> observed(top + 1, 0.0), expected(top + 1, 0.0);
  for (auto v : samples) observed[v] += 1.0;
  for (std::uint64_t k = 0; k < top; ++k) expected[k] = n * poisson_pmf(lambda, k);
  expected[top] = n * poisson_upper_tail(lambda, top - 1);
  return chi_square_gof(observed, expected);
}

GofResult two_sample_chi_square(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                double min_expected) {
  if (a.empty() || b.empty()) throw std::invalid_argument("two_sample_chi_square: empty sample");
  std::vector<std::uint64_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  const double total = na + nb;

  struct Cell {
    double a = 0.0, b = 0.0;
  };
  std::vector<Cell> kept;
  Cell rare;
  std::size_t i = 0, j = 0;
  while (i < sa.size() || j < sb.size()) {
    std::uint64_t key;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) key = sa[i];
    else key = sb[j];
    Cell c;
    while (i < sa.size() && sa[i] == key) { c.a += 1.0; ++i; }
    while (j < sb.size() && sb[j] == key) { c.b += 1.0; ++j; }
    const double pooled = c.a + c.b;
    if (std::min(pooled * na / total, pooled * nb / total) >= min_expected) kept.push_back(c);
    else {
      rare.a += c.a;
      rare.b += c.b;
    }
  }
  const double rare_pooled = rare.a + rare.b;
  if (rare_pooled > 0.0) {
    if (std::min(rare_pooled * na / total, rare_pooled * nb / total) >= min_expected || kept.empty()) {
      kept.push_back(rare);
    } else {
      auto smallest = std::min_element(kept.begin(), kept.end(),
                                       [](const Cell& x, const Cell& y) { return x.a + x.b < y.a + y.b; });
      smallest->a += rare.a;
      smallest->b += rare.b;
    }
  }
  GofResult r;
  r.bins = kept.size();
  for (const auto& c : kept) {
    const double pooled = c.a + c.b;
    const double ea = pooled * na / total;
    const double eb = pooled * nb / total;
    r.statistic += (c.a - ea) * (c.a - ea) / ea + (c.b - eb) * (c.b - eb) / eb;
  }
  r.dof = static_cast<int>(r.bins) - 1;
  if (r.dof <= 0) return r;
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

double Moments::std_error() const { return n > 0 ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }

namespace {

template <class T>
Moments moments_impl(std::span<const T> xs) {
  Moments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double sum = 0.0;
  for (auto x : xs) sum += static_cast<double>(x);
  m.mean = sum / static_cast<double>(m.n);
  double m2 = 0.0, m4 = 0.0;
  for (auto x : xs) {
    const double d = static_cast<double>(x) - m.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(m.n);
  if (m.n > 1) m.variance = m2 / (n - 1.0);
  const double mu2 = m2 / n;
  const double mu4 = m4 / n;
  if (m.n > 1) m.variance_std_error = std::sqrt(std::max(0.0, (mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n));
  return m;
}

}  // namespace

Moments moments(std::span<const double> xs) { return moments_impl(xs); }
Moments moments(std::span<const std::uint32_t> xs) { return moments_impl(xs); }

double autocovariance(std::span<const std::uint32_t> xs, std::size_t lag) {
  return cross_covariance(xs, xs, lag);
}

double cross_covariance(std::span<const std::uint32_t> x, std::span<const std::uint32_t> y, std::size_t lag) {
  const std::size_t n = std::min(x.size(), y.size());
  if (lag >= n) throw std::invalid_argument("cross_covariance: lag too large");
  const std::size_t m = n - lag;
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    mx += x[t];
    my += y[t + lag];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double acc = 0.0;
  for (std::size_t t = 0; t < m; ++t) acc += (x[t] - mx) * (y[t + lag] - my);
  return acc / static_cast<double>(m);
}

double poisson_pmf(double lambda, std::uint64_t k) {
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0));
}

double poisson_upper_tail(double lambda, std::uint64_t k) {
  if (lambda == 0.0) return 0.0;
  // P(X > k) = P(k+1, lambda), the regularised lower incomplete gamma.
  return boost::math::gamma_p(static_cast<double>(k) + 1.0, lambda);
}

std::uint64_t poisson_truncation_point(double lambda, double tol) {
  std::uint64_t t = 0;
  while (poisson_upper_tail(lambda, t) >= tol) ++t;
  return t;
}

}  // namespace ptower::stats
