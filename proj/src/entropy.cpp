#include "ptower/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ptower/errors.hpp"
#include "ptower/stats.hpp"

namespace ptower {

std::string to_string(EntropyCorrection c) { return c == EntropyCorrection::None ? "none" : "miller-madow"; }

EntropyCorrection parse_correction(const std::string& s) {
  if (s == "none") return EntropyCorrection::None;
  if (s == "miller-madow") return EntropyCorrection::MillerMadow;
  throw FormatError("unknown entropy correction '" + s + "'");
}

EntropyReport block_entropy(std::span<const std::uint32_t> symbols, std::size_t L, EntropyCorrection correction,
                            std::size_t block_floor) {
  if (L == 0) throw DomainError("block_entropy: L must be positive");
  const std::size_t n = symbols.size() >= L ? symbols.size() - L + 1 : 0;
  if (n == 0 || n < block_floor) {
    throw InsufficientSampleError("block_entropy: " + std::to_string(n) + " blocks, below the floor of " +
                                  std::to_string(std::max<std::size_t>(block_floor, 1)));
  }
  std::vector<std::uint32_t> starts(n);
  std::iota(starts.begin(), starts.end(), 0U);
  auto block = [&](std::uint32_t i) { return symbols.subspan(i, L); };
  std::sort(starts.begin(), starts.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto x = block(a), y = block(b);
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
  });

  EntropyReport out;
  out.L = L;
  out.sample_blocks = n;
  out.correction = correction;
  double h = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::ranges::equal(block(starts[i]), block(starts[j]))) ++j;
    const double p = static_cast<double>(j - i) / static_cast<double>(n);
    h -= p * std::log(p);
    ++out.distinct_blocks;
    i = j;
  }
  if (correction == EntropyCorrection::MillerMadow) {
    h += static_cast<double>(out.distinct_blocks - 1) / (2.0 * static_cast<double>(n));
  }
  out.block_entropy = std::max(h, 0.0);
  out.hL = out.block_entropy / static_cast<double>(L);
  return out;
}

EntropyReport block_entropy(const CountWindow& window, std::size_t L, std::uint32_t ell,
                            EntropyCorrection correction, std::size_t block_floor) {
  std::vector<std::uint32_t> capped(window.values.size());
  std::transform(window.values.begin(), window.values.end(), capped.begin(),
                 [ell](std::uint32_t v) { return std::min(v, ell); });
  auto out = block_entropy(capped, L, correction, block_floor);
  out.ell = ell;
  return out;
}

double poisson_entropy(double lambda, std::optional<std::uint32_t> ell) {
  if (!(lambda >= 0.0)) throw DomainError("poisson_entropy: lambda must be non-negative");
  if (lambda == 0.0) return 0.0;
  auto term = [](double p) { return p > 0.0 ? -p * std::log(p) : 0.0; };
  double h = 0.0;
  if (ell) {
    for (std::uint32_t k = 0; k < *ell; ++k) h += term(stats::poisson_pmf(lambda, k));
    const double lumped = *ell == 0 ? 1.0 : stats::poisson_upper_tail(lambda, *ell - 1);
    return h + term(lumped);
  }
  // Past the mode the terms decrease; stop once the remaining tail is negligible.
  for (std::uint64_t k = 0;; ++k) {
    const double log_p = -lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0);
    const double p = std::exp(log_p);
    h -= p * log_p;
    if (static_cast<double>(k) > lambda + 1.0) {
      const double tail = stats::poisson_upper_tail(lambda, k);
      if (tail * (1.0 - log_p) < 1e-15 || tail == 0.0) break;
    }
  }
  return h;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

double entropy_gap_bound(double dbar, std::size_t alphabet) {
  if (!(dbar >= 0.0 && dbar <= 1.0)) throw DomainError("entropy_gap_bound: dbar must lie in [0,1]");
  if (alphabet < 2) throw DomainError("entropy_gap_bound: alphabet needs at least two symbols");
  return dbar * std::log(static_cast<double>(alphabet - 1)) + binary_entropy(dbar);
}

std::string OrbitCoding::name() const {
  return (kind == Kind::Rung ? "rung(" : "return-time(") + std::to_string(parameter) + ")";
}

namespace {

// 0-based rung of x in Tower m: the first m binary digits read least
// significant first.
std::uint32_t rung_index(const DyadicPoint& x, unsigned m) {
  std::uint32_t index = 0;
  for (unsigned i = 1; i <= m; ++i) {
    if (i > x.level()) break;
    if (mpz_tstbit(x.numerator().get_mpz_t(), x.level() - i)) index |= 1U << (i - 1);
  }
  return index;
}

}  // namespace

std::vector<std::uint32_t> code_orbit(const OrbitCoding& coding, const DyadicPoint& start, std::size_t count,
                                      const Construction* construction) {
  std::map<std::uint64_t, std::uint32_t> symbol_of;
  std::uint32_t deep = 0;
  if (coding.kind == OrbitCoding::Kind::Rung) {
    if (coding.parameter == 0 || coding.parameter > 31) throw DomainError("code_orbit: rung coding needs 1 <= m <= 31");
  } else {
    if (construction == nullptr) throw DomainError("code_orbit: return-time coding needs a construction");
    if (coding.parameter == 0 || coding.parameter > construction->built_stages()) {
      throw BudgetError("code_orbit: construction not built to depth " + std::to_string(coding.parameter));
    }
    for (unsigned n = 1; n <= coding.parameter; ++n) {
      for (const auto& piece : construction->return_map(n).pieces) symbol_of.emplace(piece.r, 0);
    }
    for (auto& [r, id] : symbol_of) id = deep++;
  }

  std::vector<std::uint32_t> out;
  out.reserve(count);
  DyadicPoint x = start;
  for (std::size_t i = 0; i < count; ++i) {
    if (coding.kind == OrbitCoding::Kind::Rung) {
      out.push_back(rung_index(x, coding.parameter));
    } else {
      out.push_back(x.stage() <= coding.parameter ? symbol_of.at(construction->return_time(x)) : deep);
    }
    if (i + 1 < count) x = odometer_apply(x);
  }
  return out;
}

EntropyReport induced_coding_entropy(const OrbitCoding& coding, std::size_t blocks, std::size_t L,
                                     const DyadicPoint& start, const Construction* construction,
                                     EntropyCorrection correction) {
  const auto symbols = code_orbit(coding, start, blocks + L - 1, construction);
  return block_entropy(symbols, L, correction);
}

double lz78_entropy_rate(std::span<const std::uint32_t> symbols) {
  if (symbols.empty()) return 0.0;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint64_t> trie;
  std::uint64_t phrases = 0, node = 0;
  for (auto s : symbols) {
    auto [it, inserted] = trie.try_emplace({node, s}, trie.size() + 1);
    if (inserted) {
      ++phrases;
      node = 0;
    } else {
      node = it->second;
    }
  }
  if (node != 0) ++phrases;
  const double c = static_cast<double>(phrases);
  return c * std::log(c) / static_cast<double>(symbols.size());
}

}  // namespace ptower
