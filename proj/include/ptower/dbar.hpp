// d-bar distance between finite-alphabet processes, restricted to blocks of
// a fixed length L.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptower/suspension.hpp"

namespace ptower {

using Block = std::vector<std::uint32_t>;

/// Fraction of coordinates where x and z differ. Throws on length mismatch.
double hamming(std::span<const std::uint32_t> x, std::span<const std::uint32_t> z);

/// Blocks of length L over {0..alphabet-1} packed as base-`alphabet` integers,
/// most significant digit first.
class BlockCodec {
 public:
  BlockCodec(std::size_t L, std::uint64_t alphabet);

  std::size_t length() const { return L_; }
  std::uint64_t alphabet() const { return alphabet_; }

  std::uint64_t encode(std::span<const std::uint32_t> block) const;
  Block decode(std::uint64_t key) const;
  std::uint32_t digit(std::uint64_t key, std::size_t i) const;
  /// Number of differing digits.
  unsigned distance(std::uint64_t a, std::uint64_t b) const;

 private:
  std::size_t L_;
  std::uint64_t alphabet_;
  std::vector<std::uint64_t> powers_;  // powers_[i] = alphabet^(L-1-i)
};

struct BlockDistribution {
  std::size_t L = 1;
  std::uint64_t alphabet = 2;
  std::vector<std::uint64_t> keys;  // sorted, distinct
  std::vector<double> mass;
  // Present for empirical distributions; masses are then counts / total.
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  /// Sums repeated keys and drops zero masses.
  static BlockDistribution from_masses(std::size_t L, std::uint64_t alphabet,
                                       std::vector<std::pair<std::uint64_t, double>> entries);
  static BlockDistribution from_blocks(std::size_t L, std::uint64_t alphabet, const std::vector<Block>& blocks,
                                       std::span<const double> masses);
  static BlockDistribution from_samples(std::size_t L, std::uint64_t alphabet, std::vector<std::uint64_t> samples);

  BlockCodec codec() const { return {L, alphabet}; }
  bool empirical() const { return total > 0; }
  /// Masses are non-negative and sum to 1 within 1e-12.
  void validate() const;
};

struct TransportPlan {
  struct Entry {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    double mass = 0.0;
  };
  std::size_t L = 1;
  std::uint64_t alphabet = 2;
  std::vector<Entry> entries;  // sorted by (a, b)

  /// Expected normalised Hamming distance under the plan.
  double cost() const;
  /// Largest deviation of the plan marginals from P and Q.
  double marginal_error(const BlockDistribution& P, const BlockDistribution& Q) const;
  /// `blockA,blockB,mass` rows with blocks written as colon-joined digits.
  std::string to_csv() const;
};

enum class DbarRoute { Auto, Dense, Patterns };

struct DbarResult {
  double value = 0.0;
  TransportPlan plan;
  std::string solver;  // "identity", "dense" or "patterns"
  std::size_t residual_support_a = 0;
  std::size_t residual_support_b = 0;
  std::size_t arcs = 0;
  int phases = 0;
};

/// Exact d-bar_L: the minimum expected normalised Hamming distance over all
/// couplings of P and Q. The common mass min(P, Q) stays on the diagonal; the
/// rest is routed either on the complete bipartite graph or through wildcard
/// patterns (x reaches every block agreeing with it off a coordinate set S at
/// cost |S|), which keeps the graph small for large supports.
DbarResult dbar_L_exact(const BlockDistribution& P, const BlockDistribution& Q, DbarRoute route = DbarRoute::Auto);

/// Overlapping L-blocks (stride 1) of `values` after saturating at ell.
std::vector<std::uint64_t> harvest_blocks(std::span<const std::uint32_t> values, std::size_t L, std::uint32_t ell);

struct EmpiricalDbar {
  double value = 0.0;
  std::size_t L = 0;
  std::uint32_t ell = 0;
  std::size_t blocks_a = 0;
  std::size_t blocks_b = 0;
  std::size_t support_a = 0;
  std::size_t support_b = 0;
  std::string solver;
};

/// dbar_L_exact between the empirical L-block laws of two windows truncated
/// at ell. Throws InsufficientSampleError when either window yields fewer
/// than `block_floor` blocks.
EmpiricalDbar dbar_L_empirical(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, std::size_t L,
                               std::uint32_t ell, std::size_t block_floor = 10'000);
EmpiricalDbar dbar_L_empirical(const CountWindow& a, const CountWindow& b, std::size_t L, std::uint32_t ell,
                               std::size_t block_floor = 10'000);

struct ConditionalBound {
  double epsilon = 0.0;
  double bound = 0.0;
  std::string caveat;
};

/// 3 eps with eps = max(bad_mass, max_l1).
ConditionalBound dbar_upper_conditional(double bad_mass, double max_l1);

/// Pointwise min(value, ell).
CountWindow truncate(const CountWindow& window, std::uint32_t ell);

}  // namespace ptower
