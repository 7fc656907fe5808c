// The Von Neumann-Kakutani odometer on A = [0,1), its cutting-and-stacking
// towers, and the staged first-return time to A of the tower transformation
// built over it.
//
// All interval arithmetic is exact (GMP rationals). Stage n defines the
// return time on A_n = [1 - 2^{-(n-1)}, 1 - 2^{-n}), the rung of level
// 2^{n-1} in Tower n.
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "ptower/config.hpp"

namespace ptower {

using BigInt = mpz_class;
using Rational = mpq_class;

/// x = numerator / 2^level in [0,1), kept in lowest terms.
class DyadicPoint {
 public:
  DyadicPoint() = default;
  DyadicPoint(BigInt numerator, unsigned level);

  static DyadicPoint from_rational(const Rational& q);

  const BigInt& numerator() const { return numerator_; }
  unsigned level() const { return level_; }
  Rational value() const;

  /// Number of leading 1 digits of the binary expansion: x lies in
  /// [1 - 2^{-k}, 1 - 2^{-k-1}).
  unsigned leading_ones() const;

  /// Index m with x in A_m.
  unsigned stage() const { return leading_ones() + 1; }

  std::string to_string() const;

  friend bool operator==(const DyadicPoint&, const DyadicPoint&);

 private:
  BigInt numerator_ = 0;
  unsigned level_ = 0;
};

/// S(x): binary add-one-with-carry on the expansion read least significant
/// digit first.
DyadicPoint odometer_apply(const DyadicPoint& x);

/// S^{-1}(x). Throws DomainError at 0, whose preimage is the excluded point 1.
DyadicPoint odometer_inverse(const DyadicPoint& x);

struct Interval {
  Rational left;
  Rational right;

  Rational length() const { return right - left; }
  bool contains(const Rational& x) const { return left <= x && x < right; }
  friend bool operator==(const Interval& a, const Interval& b) { return a.left == b.left && a.right == b.right; }
};

/// A_n, the base rung on which stage n defines the return time.
Interval base_set(unsigned n);

struct StageParams {
  std::uint64_t M = 0;
  std::uint64_t k = 0;
};

/// Growth rule M_n ~ m_scale * m_base^n, k_n ~ k_scale * k_base^n used only to
/// decide whether the full (infinite-stage) space would have infinite measure.
struct AsymptoticRule {
  double m_scale = 1.0;
  double m_base = 1.0;
  double k_scale = 1.0;
  double k_base = 1.0;
};

class StageSchedule {
 public:
  StageSchedule() = default;
  explicit StageSchedule(std::vector<StageParams> stages);

  /// M_n = 2 + 4(n-1) with a constant k for `stages` stages.
  static StageSchedule standard(unsigned stages, std::uint64_t k);
  static StageSchedule standard(const std::vector<std::uint64_t>& ks);

  /// Reads `M.n` and `k.n` keys (plus optional `asymptotic.*` keys).
  static StageSchedule from_key_values(const KeyValues& kv);
  static StageSchedule parse(std::string_view text);
  static StageSchedule load(const std::string& path);
  std::string to_text() const;
  /// FNV-1a of to_text(), hex.
  std::string hash() const;

  unsigned size() const { return static_cast<unsigned>(stages_.size()); }
  std::uint64_t M(unsigned n) const { return at(n).M; }
  std::uint64_t k(unsigned n) const { return at(n).k; }
  /// R_n = max_{i<=n} (M_i + k_i - 1); R_0 = 0.
  std::uint64_t R(unsigned n) const;
  const StageParams& at(unsigned n) const;

  const std::optional<AsymptoticRule>& asymptotic() const { return asymptotic_; }
  void set_asymptotic(AsymptoticRule rule) { asymptotic_ = rule; }

  /// Sum over built stages of mu(A_n) * E[r | A_n] = 2^{-n} (M_n + (k_n - 1)/2).
  Rational finite_measure_through(unsigned n) const;
  /// Whether sum 2^{-n}(M_n + (k_n-1)/2) diverges under the asymptotic rule;
  /// nullopt without a rule.
  std::optional<bool> infinite_measure() const;

 private:
  void validate() const;

  std::vector<StageParams> stages_;
  std::optional<AsymptoticRule> asymptotic_;
};

bool infinite_measure(const AsymptoticRule& rule);

struct Tower {
  unsigned n = 0;
  std::vector<Interval> rungs;  // bottom to top

  /// 1-based rung accessor.
  const Interval& rung(std::size_t i) const { return rungs.at(i - 1); }
  std::size_t height() const { return rungs.size(); }
  std::size_t base_rung_index() const { return rungs.size() / 2; }
};

struct Budget {
  std::size_t rungs = std::size_t{1} << 20;
  std::size_t pieces = 1'000'000;
};

Tower tower(unsigned n, const Budget& budget = {});

struct ReturnPiece {
  Interval interval;
  std::uint64_t r = 0;
};

struct ReturnTimeMap {
  unsigned stage = 0;
  std::vector<ReturnPiece> pieces;  // sorted by left endpoint, partition A_stage

  std::uint64_t lookup(const Rational& x) const;
  std::string to_csv(bool header = true) const;
};

using Label = std::vector<std::uint32_t>;

struct LabelPair {
  Label black;  // return times climbing rungs 1 .. 2^{n-1}
  Label white;  // return times climbing rungs 2^{n-1}+1 .. 2^n from S(y)
  auto operator<=>(const LabelPair&) const = default;
  bool operator==(const LabelPair&) const = default;
};

struct LabeledCell {
  Interval interval;
  LabelPair labels;
};

/// Joint law of (h^B(y), h^W(y)) for y uniform on A_n.
struct LabelLaw {
  unsigned stage = 0;
  std::vector<LabelPair> pairs;
  std::vector<Rational> mass;  // exact masses (empty when sampled)
  std::vector<double> probability;
  bool sampled = false;
  std::size_t samples = 0;

  std::map<Label, double> black_marginal() const;
  std::map<Label, double> white_marginal() const;
};

/// Return maps for stages 1..n, built once and then immutable.
class Construction {
 public:
  Construction(StageSchedule schedule, unsigned through_stage, Budget budget = {});

  const StageSchedule& schedule() const { return schedule_; }
  const Budget& budget() const { return budget_; }
  unsigned built_stages() const { return static_cast<unsigned>(maps_.size()); }
  const ReturnTimeMap& return_map(unsigned n) const;

  std::uint64_t return_time(const DyadicPoint& x) const;

  /// Cells of the partition of A_n generated by (h^B, h^W); needs stages < n.
  std::vector<LabeledCell> label_cells(unsigned n) const;

  LabelPair label_of(const DyadicPoint& y, unsigned n) const;

  /// Exact law by enumeration of label cells; BudgetError past the piece budget.
  LabelLaw label_law(unsigned n) const;
  /// Monte Carlo approximation of label_law from uniform points of A_n.
  LabelLaw sample_label_law(unsigned n, std::size_t samples, std::uint64_t seed) const;

  /// Uniform point of A_n with `extra_bits` random digits below level n.
  DyadicPoint random_point(unsigned n, std::uint64_t bits_word, unsigned extra_bits = 62) const;

  /// Sum over built pieces of length * r.
  Rational kac_total() const;

 private:
  ReturnTimeMap build_stage(unsigned n) const;

  StageSchedule schedule_;
  Budget budget_;
  std::vector<ReturnTimeMap> maps_;
};

}  // namespace ptower
