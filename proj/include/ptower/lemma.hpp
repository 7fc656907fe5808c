// Connected and disconnected labelled particle processes on Z, and the
// closed forms used to compare them.
//
// The disconnected process places independent Poisson(delta/2) black and
// white particles on every site. In the connected process every black
// particle at x is linked to a white particle at x + j, j uniform on
// {M, ..., M+k-1}, and the pair receives a label couple drawn from a joining.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ptower {

/// A probability law on (black label) x (white label), stored by atoms.
struct LabelJoining {
  struct Atom {
    std::uint32_t black = 0;
    std::uint32_t white = 0;
    double probability = 0.0;
  };

  std::size_t black_alphabet = 1;
  std::size_t white_alphabet = 1;
  std::vector<Atom> atoms{{0, 0, 1.0}};

  static LabelJoining singleton() { return {}; }
  /// Row-major |black| x |white| matrix of probabilities; zero entries dropped.
  static LabelJoining from_matrix(std::size_t rows, std::size_t cols, std::span<const double> probs);

  std::vector<double> black_marginal() const;
  std::vector<double> white_marginal() const;
  void validate() const;
};

struct LemmaParams {
  double delta = 1.0;  // expected black + white particles per site
  std::uint64_t M = 1;
  std::uint64_t k = 1;
  LabelJoining joining;

  void validate() const;
};

struct SiteWindow {
  std::int64_t first = 0;
  std::int64_t last = -1;  // inclusive

  std::int64_t size() const { return last - first + 1; }
  bool contains(std::int64_t x) const { return first <= x && x <= last; }
};

struct Link {
  std::int64_t black_site = 0;
  std::int64_t white_site = 0;
  std::uint32_t black_label = 0;
  std::uint32_t white_label = 0;
};

/// Per-site label -> count maps for black and white particles on a window.
class LabeledSiteCounts {
 public:
  struct Entry {
    std::uint32_t label = 0;
    std::uint32_t count = 0;
  };
  struct Particle {
    std::int64_t site = 0;
    std::uint32_t label = 0;
  };

  LabeledSiteCounts() = default;
  /// Particles outside the window are ignored.
  LabeledSiteCounts(SiteWindow window, std::vector<Particle> black, std::vector<Particle> white,
                    std::vector<Link> links = {}, bool has_links = false);

  const SiteWindow& window() const { return window_; }
  std::span<const Entry> black_at(std::int64_t x) const;
  std::span<const Entry> white_at(std::int64_t x) const;
  std::uint32_t black_total(std::int64_t x) const;
  std::uint32_t white_total(std::int64_t x) const;
  std::uint32_t black(std::int64_t x, std::uint32_t label) const;
  std::uint32_t white(std::int64_t x, std::uint32_t label) const;

  std::vector<std::uint32_t> black_totals() const;
  std::vector<std::uint32_t> white_totals() const;

  bool has_links() const { return has_links_; }
  const std::vector<Link>& links() const { return links_; }

 private:
  static void build(const SiteWindow& w, std::vector<Particle>& ps, std::vector<std::size_t>& offsets,
                    std::vector<Entry>& entries);

  SiteWindow window_;
  std::vector<std::size_t> black_offsets_, white_offsets_;
  std::vector<Entry> black_entries_, white_entries_;
  std::vector<Link> links_;
  bool has_links_ = false;
};

/// Independent Poisson(P^B(a) delta/2) black and Poisson(P^W(b) delta/2)
/// white counts on every site.
LabeledSiteCounts sample_xi(const LemmaParams& params, SiteWindow window, std::uint64_t seed);

/// Linked process. Blacks are drawn on [first - (M+k-1), last] so that white
/// counts inside the window are stationary. With keep_links, every pair with
/// at least one end in the window is recorded.
LabeledSiteCounts sample_zeta(const LemmaParams& params, SiteWindow window, std::uint64_t seed,
                              bool keep_links = false);

/// Black/white counts over the window restricted to pairs labelled (a, b);
/// needs link records.
struct ComponentCounts {
  std::vector<std::uint32_t> black;
  std::vector<std::uint32_t> white;
};
ComponentCounts component_counts(const LabeledSiteCounts& sample, std::uint32_t black_label,
                                 std::uint32_t white_label);

/// Free black particles seen from site 0 in the enriched past.
struct FreeCounts {
  std::vector<std::uint32_t> F;       // F[j-1]: free blacks at site -(M+k)+j
  std::vector<std::uint32_t> blacks;  // all blacks at site -(M+k)+j
  std::uint32_t free_right = 0;       // free blacks on (-M, -1], irrelevant for site 0
  std::uint32_t free_left = 0;        // free blacks left of -(M+k-1); always 0

  std::uint64_t total_free() const;
};

/// Classifies the blacks of a linked sample on [-depth, -1] (links kept) as
/// free iff their white lies at a site >= 0.
FreeCounts enriched_past(const LabeledSiteCounts& sample, const LemmaParams& params, std::int64_t depth);

/// Law of sum_j sum_{l <= F_j} B^j_l with B^j_l ~ Bernoulli(1/j), by convolution.
std::vector<double> conditional_white_law(std::span<const std::uint32_t> F);

/// Law of a sum of independent Bernoulli(p_i), by convolution.
std::vector<double> bernoulli_sum_law(std::span<const double> p);

/// sum_l |law(l) - Poisson(lambda)(l)| including the Poisson tail beyond the
/// support of `law` (unhalved L1, i.e. twice the total variation).
double l1_to_poisson(std::span<const double> law, double lambda);

/// exp(-delta J (J+1) / (4k)); J = 0 gives 1.
double no_free_probability(std::uint64_t J, std::uint64_t k, double delta);

struct ParamSumStats {
  double mean = 0.0;
  double variance = 0.0;
};
/// Mean and variance of S = sum_j F_j / j: (delta/2, delta H_k / (2k)).
ParamSumStats param_sum_stats(std::uint64_t k, double delta);

double harmonic_number(std::uint64_t k);

struct LeCamGap {
  double lambda = 0.0;
  double exact_l1 = 0.0;
  double bound = 0.0;  // 2 sum p_i^2
};
LeCamGap lecam_gap(std::span<const double> p);

struct CriterionEstimate {
  double epsilon_target = 0.0;
  std::size_t replicates = 0;
  double bad_mass = 0.0;          // fraction of pasts with L1 >= epsilon_target
  double max_l1_good = 0.0;       // largest L1 among the remaining pasts
  double common_epsilon = 0.0;    // smallest eps with fraction(L1 >= eps) <= eps
  std::vector<double> l1;         // per replicate, in replicate order
};

/// Runs fn(replicate, free counts) over independent enriched pasts of depth
/// n_past. Replicate r uses seed_split(seed, "enriched-past", r).
void for_each_enriched_past(const LemmaParams& params, std::int64_t n_past, std::size_t replicates,
                            std::uint64_t seed, const std::function<void(std::size_t, const FreeCounts&)>& fn);

CriterionEstimate conditional_criterion_estimate(const LemmaParams& params, std::int64_t n_past,
                                                 double epsilon_target, std::size_t replicates,
                                                 std::uint64_t seed);

/// Infimum of eps such that the fraction of values >= eps is at most eps.
double common_epsilon(std::span<const double> values);

}  // namespace ptower
