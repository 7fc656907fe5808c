#include "ptower/lemma.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ptower/errors.hpp"
#include "ptower/parallel.hpp"
#include "ptower/rng.hpp"
#include "ptower/stats.hpp"

namespace ptower {

LabelJoining LabelJoining::from_matrix(std::size_t rows, std::size_t cols, std::span<const double> probs) {
  if (probs.size() != rows * cols) throw DomainError("joining: matrix size mismatch");
  LabelJoining j;
  j.black_alphabet = rows;
  j.white_alphabet = cols;
  j.atoms.clear();
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t b = 0; b < cols; ++b) {
      const double p = probs[a * cols + b];
      if (p > 0.0) j.atoms.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), p});
    }
  }
  j.validate();
  return j;
}

std::vector<double> LabelJoining::black_marginal() const {
  std::vector<double> m(black_alphabet, 0.0);
  for (const auto& a : atoms) m[a.black] += a.probability;
  return m;
}

std::vector<double> LabelJoining::white_marginal() const {
  std::vector<double> m(white_alphabet, 0.0);
  for (const auto& a : atoms) m[a.white] += a.probability;
  return m;
}

void LabelJoining::validate() const {
  if (atoms.empty()) throw DomainError("joining: no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (a.probability < 0.0) throw DomainError("joining: negative mass");
    if (a.black >= black_alphabet || a.white >= white_alphabet) throw DomainError("joining: label out of range");
    total += a.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("joining: masses do not sum to 1");
}

void LemmaParams::validate() const {
  if (!(delta > 0.0)) throw DomainError("lemma params: delta must be positive");
  if (M < 1) throw DomainError("lemma params: M must be at least 1");
  if (k < 1) throw DomainError("lemma params: k must be at least 1");
  joining.validate();
}

// ---------------------------------------------------------------------------

LabeledSiteCounts::LabeledSiteCounts(SiteWindow window, std::vector<Particle> black, std::vector<Particle> white,
                                     std::vector<Link> links, bool has_links)
    : window_(window), links_(std::move(links)), has_links_(has_links) {
  if (window_.size() < 0) throw DomainError("LabeledSiteCounts: negative window");
  build(window_, black, black_offsets_, black_entries_);
  build(window_, white, white_offsets_, white_entries_);
}

void LabeledSiteCounts::build(const SiteWindow& w, std::vector<Particle>& ps, std::vector<std::size_t>& offsets,
                              std::vector<Entry>& entries) {
  std::erase_if(ps, [&](const Particle& p) { return !w.contains(p.site); });
  std::sort(ps.begin(), ps.end(),
            [](const Particle& a, const Particle& b) { return a.site != b.site ? a.site < b.site : a.label < b.label; });
  const auto n = static_cast<std::size_t>(w.size());
  offsets.assign(n + 1, 0);
  entries.clear();
  std::size_t i = 0;
  for (std::size_t s = 0; s < n; ++s) {
    offsets[s] = entries.size();
    const std::int64_t site = w.first + static_cast<std::int64_t>(s);
    while (i < ps.size() && ps[i].site == site) {
      if (!entries.empty() && entries.size() > offsets[s] && entries.back().label == ps[i].label) {
        ++entries.back().count;
      } else {
        entries.push_back({ps[i].label, 1});
      }
      ++i;
    }
  }
  offsets[n] = entries.size();
}

std::span<const LabeledSiteCounts::Entry> LabeledSiteCounts::black_at(std::int64_t x) const {
  if (!window_.contains(x)) throw DomainError("LabeledSiteCounts: site outside window");
  const auto s = static_cast<std::size_t>(x - window_.first);
  return {black_entries_.data() + black_offsets_[s], black_offsets_[s + 1] - black_offsets_[s]};
}

std::span<const LabeledSiteCounts::Entry> LabeledSiteCounts::white_at(std::int64_t x) const {
  if (!window_.contains(x)) throw DomainError("LabeledSiteCounts: site outside window");
  const auto s = static_cast<std::size_t>(x - window_.first);
  return {white_entries_.data() + white_offsets_[s], white_offsets_[s + 1] - white_offsets_[s]};
}

namespace {

std::uint32_t total(std::span<const LabeledSiteCounts::Entry> es) {
  std::uint32_t t = 0;
  for (const auto& e : es) t += e.count;
  return t;
}

std::uint32_t find_label(std::span<const LabeledSiteCounts::Entry> es, std::uint32_t label) {
  for (const auto& e : es) {
    if (e.label == label) return e.count;
  }
  return 0;
}

}  // namespace

std::uint32_t LabeledSiteCounts::black_total(std::int64_t x) const { return total(black_at(x)); }
std::uint32_t LabeledSiteCounts::white_total(std::int64_t x) const { return total(white_at(x)); }
std::uint32_t LabeledSiteCounts::black(std::int64_t x, std::uint32_t label) const {
  return find_label(black_at(x), label);
}
std::uint32_t LabeledSiteCounts::white(std::int64_t x, std::uint32_t label) const {
  return find_label(white_at(x), label);
}

std::vector<std::uint32_t> LabeledSiteCounts::black_totals() const {
  std::vector<std::uint32_t> out;
  out.reserve(static_cast<std::size_t>(window_.size()));
  for (auto x = window_.first; x <= window_.last; ++x) out.push_back(black_total(x));
  return out;
}

std::vector<std::uint32_t> LabeledSiteCounts::white_totals() const {
  std::vector<std::uint32_t> out;
  out.reserve(static_cast<std::size_t>(window_.size()));
  for (auto x = window_.first; x <= window_.last; ++x) out.push_back(white_total(x));
  return out;
}

// ---------------------------------------------------------------------------
// Samplers

namespace {

class LabelSampler {
 public:
  explicit LabelSampler(std::span<const double> weights)
      : trivial_(weights.size() == 1), dist_(weights.begin(), weights.end()) {}
  template <class G>
  std::uint32_t operator()(G& g) {
    return trivial_ ? 0U : static_cast<std::uint32_t>(dist_(g));
  }

 private:
  bool trivial_;
  std::discrete_distribution<std::uint32_t> dist_;
};

}  // namespace

LabeledSiteCounts sample_xi(const LemmaParams& params, SiteWindow window, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  std::poisson_distribution<std::uint32_t> count(params.delta / 2.0);
  const auto pb = params.joining.black_marginal();
  const auto pw = params.joining.white_marginal();
  LabelSampler black_label(pb), white_label(pw);
  std::vector<LabeledSiteCounts::Particle> black, white;
  // Poisson thinning: a Poisson(delta/2) total with i.i.d. labels gives
  // independent Poisson(P(a) delta/2) per-label counts.
  for (auto x = window.first; x <= window.last; ++x) {
    for (auto n = count(rng); n > 0; --n) black.push_back({x, black_label(rng)});
    for (auto n = count(rng); n > 0; --n) white.push_back({x, white_label(rng)});
  }
  return LabeledSiteCounts(window, std::move(black), std::move(white));
}

LabeledSiteCounts sample_zeta(const LemmaParams& params, SiteWindow window, std::uint64_t seed, bool keep_links) {
  params.validate();
  Rng rng(seed);
  std::poisson_distribution<std::uint32_t> count(params.delta / 2.0);
  std::uniform_int_distribution<std::uint64_t> offset(params.M, params.M + params.k - 1);
  std::vector<double> weights;
  for (const auto& a : params.joining.atoms) weights.push_back(a.probability);
  LabelSampler atom(weights);

  std::vector<LabeledSiteCounts::Particle> black, white;
  std::vector<Link> links;
  const std::int64_t reach = static_cast<std::int64_t>(params.M + params.k - 1);
  for (auto x = window.first - reach; x <= window.last; ++x) {
    for (auto n = count(rng); n > 0; --n) {
      const auto w = x + static_cast<std::int64_t>(offset(rng));
      const auto& pair = params.joining.atoms[atom(rng)];
      const bool black_in = window.contains(x);
      const bool white_in = window.contains(w);
      if (black_in) black.push_back({x, pair.black});
      if (white_in) white.push_back({w, pair.white});
      if (keep_links && (black_in || white_in)) links.push_back({x, w, pair.black, pair.white});
    }
  }
  return LabeledSiteCounts(window, std::move(black), std::move(white), std::move(links), keep_links);
}

ComponentCounts component_counts(const LabeledSiteCounts& sample, std::uint32_t black_label,
                                  std::uint32_t white_label) {
  if (!sample.has_links()) throw DomainError("component_counts: sample has no link records");
  const auto& w = sample.window();
  ComponentCounts out;
  out.black.assign(static_cast<std::size_t>(w.size()), 0);
  out.white.assign(static_cast<std::size_t>(w.size()), 0);
  for (const auto& l : sample.links()) {
    if (l.black_label != black_label || l.white_label != white_label) continue;
    if (w.contains(l.black_site)) ++out.black[static_cast<std::size_t>(l.black_site - w.first)];
    if (w.contains(l.white_site)) ++out.white[static_cast<std::size_t>(l.white_site - w.first)];
  }
  return out;
}

std::uint64_t FreeCounts::total_free() const {
  std::uint64_t t = 0;
  for (auto f : F) t += f;
  return t;
}

FreeCounts enriched_past(const LabeledSiteCounts& sample, const LemmaParams& params, std::int64_t depth) {
  const auto M = static_cast<std::int64_t>(params.M);
  const auto k = static_cast<std::int64_t>(params.k);
  if (depth < M + k) throw DomainError("enriched_past: depth must be at least M + k");
  if (!sample.has_links()) throw DomainError("enriched_past: sample has no link records");
  const auto& w = sample.window();
  if (!(w.contains(-depth) && w.contains(-1))) throw DomainError("enriched_past: sample does not cover [-depth, -1]");

  FreeCounts fc;
  fc.F.assign(static_cast<std::size_t>(k), 0);
  fc.blacks.assign(static_cast<std::size_t>(k), 0);
  for (const auto& l : sample.links()) {
    const auto x = l.black_site;
    if (x < -depth || x > -1) continue;
    const bool is_free = l.white_site >= 0;
    const auto j = x + M + k;  // site -(M+k)+j
    if (j >= 1 && j <= k) {
      ++fc.blacks[static_cast<std::size_t>(j - 1)];
      if (is_free) ++fc.F[static_cast<std::size_t>(j - 1)];
    } else if (is_free) {
      (j > k ? fc.free_right : fc.free_left) += 1;
    }
  }
  return fc;
}

std::vector<double> bernoulli_sum_law(std::span<const double> p) {
  std::vector<double> law{1.0};
  law.reserve(p.size() + 1);
  for (double q : p) {
    if (q < 0.0 || q > 1.0) throw DomainError("bernoulli_sum_law: parameter outside [0,1]");
    law.push_back(0.0);
    for (std::size_t i = law.size() - 1; i > 0; --i) law[i] = law[i] * (1.0 - q) + law[i - 1] * q;
    law[0] *= (1.0 - q);
  }
  return law;
}

std::vector<double> conditional_white_law(std::span<const std::uint32_t> F) {
  std::vector<double> p;
  for (std::size_t j = 0; j < F.size(); ++j) {
    for (std::uint32_t c = 0; c < F[j]; ++c) p.push_back(1.0 / static_cast<double>(j + 1));
  }
  return bernoulli_sum_law(p);
}

double l1_to_poisson(std::span<const double> law, double lambda) {
  double l1 = 0.0;
  for (std::size_t l = 0; l < law.size(); ++l) l1 += std::abs(law[l] - stats::poisson_pmf(lambda, l));
  return l1 + stats::poisson_upper_tail(lambda, law.empty() ? 0 : law.size() - 1) +
         (law.empty() ? stats::poisson_pmf(lambda, 0) : 0.0);
}

double no_free_probability(std::uint64_t J, std::uint64_t k, double delta) {
  if (J > k) throw DomainError("no_free_probability: J must not exceed k");
  const double j = static_cast<double>(J);
  return std::exp(-delta * j * (j + 1.0) / (4.0 * static_cast<double>(k)));
}

double harmonic_number(std::uint64_t k) {
  double h = 0.0;
  for (std::uint64_t j = k; j >= 1; --j) h += 1.0 / static_cast<double>(j);
  return h;
}

ParamSumStats param_sum_stats(std::uint64_t k, double delta) {
  if (k < 1) throw DomainError("param_sum_stats: k must be at least 1");
  return {delta / 2.0, delta / (2.0 * static_cast<double>(k)) * harmonic_number(k)};
}

LeCamGap lecam_gap(std::span<const double> p) {
  LeCamGap g;
  for (double q : p) {
    g.lambda += q;
    g.bound += 2.0 * q * q;
  }
  g.exact_l1 = l1_to_poisson(bernoulli_sum_law(p), g.lambda);
  return g;
}

void for_each_enriched_past(const LemmaParams& params, std::int64_t n_past, std::size_t replicates,
                            std::uint64_t seed, const std::function<void(std::size_t, const FreeCounts&)>& fn) {
  params.validate();
  if (n_past < static_cast<std::int64_t>(params.M + params.k)) {
    throw DomainError("enriched past depth must be at least M + k");
  }
  parallel_for(replicates, [&](std::size_t r) {
    const auto sample = sample_zeta(params, {-n_past, -1}, seed_split(seed, "enriched-past", r), true);
    fn(r, enriched_past(sample, params, n_past));
  });
}

CriterionEstimate conditional_criterion_estimate(const LemmaParams& params, std::int64_t n_past,
                                                 double epsilon_target, std::size_t replicates,
                                                 std::uint64_t seed) {
  CriterionEstimate est;
  est.epsilon_target = epsilon_target;
  est.replicates = replicates;
  est.l1.assign(replicates, 0.0);
  const double lambda = params.delta / 2.0;
  for_each_enriched_past(params, n_past, replicates, seed, [&](std::size_t r, const FreeCounts& fc) {
    est.l1[r] = l1_to_poisson(conditional_white_law(fc.F), lambda);
  });
  std::size_t bad = 0;
  for (double v : est.l1) {
    if (v >= epsilon_target) ++bad;
    else est.max_l1_good = std::max(est.max_l1_good, v);
  }
  est.bad_mass = replicates ? static_cast<double>(bad) / static_cast<double>(replicates) : 0.0;
  est.common_epsilon = common_epsilon(est.l1);
  return est;
}

double common_epsilon(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto R = static_cast<double>(v.size());
  if (v.empty()) return 0.0;
  // Allowing the m largest values to be bad needs eps > v[R-m-1] and eps >= m/R.
  double best = 1.0;
  for (std::size_t m = 0; m <= v.size(); ++m) {
    const double below = m < v.size() ? v[v.size() - 1 - m] : 0.0;
    best = std::min(best, std::max(below, static_cast<double>(m) / R));
  }
  return best;
}

}  // namespace ptower
