// Counter-based random number generation and seed derivation.
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace ptower {

/// Philox4x32-10 counter-based generator (Salmon et al. constants).
///
/// The 64-bit key selects an independent stream; the 128-bit counter walks
/// through it. Satisfies UniformRandomBitGenerator with 64-bit output, so it
/// plugs into the <random> distributions.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t key = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// Raw block function, exposed for known-answer tests.
  static Counter block(Counter counter, Key key) noexcept;

  std::uint64_t key() const noexcept;

 private:
  void refill() noexcept;

  Key key_{};
  Counter counter_{};
  Counter buffer_{};
  int used_ = 4;
};

using Rng = Philox4x32;

/// Derives a sub-seed from a master seed and a label path.
///
/// Identical inputs give identical outputs; each label is hashed with its
/// length so that ("ab","c") and ("a","bc") differ.
std::uint64_t seed_split(std::uint64_t master, std::initializer_list<std::string_view> path);
std::uint64_t seed_split(std::uint64_t master, const std::vector<std::string>& path);
std::uint64_t seed_split(std::uint64_t master, std::string_view label, std::uint64_t index);

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace ptower
