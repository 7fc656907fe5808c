// Block-entropy estimation, Poisson entropy, the d-bar continuity modulus,
// and symbolic codings of odometer orbits.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptower/construction.hpp"
#include "ptower/suspension.hpp"

namespace ptower {

enum class EntropyCorrection { None, MillerMadow };

std::string to_string(EntropyCorrection c);
EntropyCorrection parse_correction(const std::string& s);

struct EntropyReport {
  std::size_t L = 0;
  std::uint32_t ell = 0;   // alphabet cap; 0 when the alphabet is not a truncation
  double block_entropy = 0.0;  // H_L in nats
  double hL = 0.0;             // H_L / L
  std::size_t sample_blocks = 0;
  std::size_t distinct_blocks = 0;
  EntropyCorrection correction = EntropyCorrection::None;
};

/// Plug-in entropy of the overlapping L-blocks of `symbols`.
EntropyReport block_entropy(std::span<const std::uint32_t> symbols, std::size_t L,
                            EntropyCorrection correction = EntropyCorrection::None, std::size_t block_floor = 1);

/// Same, after saturating the window at ell. Throws InsufficientSampleError
/// when fewer than block_floor blocks are available.
EntropyReport block_entropy(const CountWindow& window, std::size_t L, std::uint32_t ell,
                            EntropyCorrection correction = EntropyCorrection::None,
                            std::size_t block_floor = 10'000);

/// Entropy of Poisson(lambda) in nats; with ell the law of min(X, ell).
double poisson_entropy(double lambda, std::optional<std::uint32_t> ell = std::nullopt);

/// Binary entropy in nats.
double binary_entropy(double p);

/// d ln(alphabet - 1) + H2(d).
double entropy_gap_bound(double dbar, std::size_t alphabet);

struct OrbitCoding {
  enum class Kind { ReturnTime, Rung };
  Kind kind = Kind::Rung;
  unsigned parameter = 1;  // depth for ReturnTime, m for Rung

  static OrbitCoding rung(unsigned m) { return {Kind::Rung, m}; }
  static OrbitCoding return_time(unsigned depth) { return {Kind::ReturnTime, depth}; }
  std::string name() const;
};

/// Symbol sequence of y, S y, S^2 y, ... (count symbols). Rung coding gives
/// the 0-based rung index in Tower m. Return-time coding gives r(x) for
/// points of A_1..A_depth, relabelled densely in increasing order of r, and
/// one reserved symbol (the largest) for deeper points.
std::vector<std::uint32_t> code_orbit(const OrbitCoding& coding, const DyadicPoint& start, std::size_t count,
                                      const Construction* construction = nullptr);

/// block_entropy of the coded orbit with `blocks` overlapping L-blocks.
EntropyReport induced_coding_entropy(const OrbitCoding& coding, std::size_t blocks, std::size_t L,
                                     const DyadicPoint& start, const Construction* construction = nullptr,
                                     EntropyCorrection correction = EntropyCorrection::None);

/// LZ78 phrase-count estimate c ln c / n of the entropy rate, in nats.
double lz78_entropy_rate(std::span<const std::uint32_t> symbols);

}  // namespace ptower
