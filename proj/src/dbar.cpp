#include "ptower/dbar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <type_traits>

#include "ptower/errors.hpp"
#include "ptower/parallel.hpp"
#include "ptower/transport.hpp"

namespace ptower {

double hamming(std::span<const std::uint32_t> x, std::span<const std::uint32_t> z) {
  if (x.size() != z.size()) throw DomainError("hamming: blocks differ in length");
  if (x.empty()) throw DomainError("hamming: empty blocks");
  std::size_t differ = 0;
  for (std::size_t i = 0; i < x.size(); ++i) differ += x[i] != z[i] ? 1 : 0;
  return static_cast<double>(differ) / static_cast<double>(x.size());
}

BlockCodec::BlockCodec(std::size_t L, std::uint64_t alphabet) : L_(L), alphabet_(alphabet) {
  if (L == 0) throw DomainError("BlockCodec: L must be positive");
  if (alphabet < 1) throw DomainError("BlockCodec: empty alphabet");
  powers_.assign(L, 1);
  for (std::size_t i = L - 1; i-- > 0;) {
    if (powers_[i + 1] > std::numeric_limits<std::uint64_t>::max() / alphabet) {
      throw BudgetError("BlockCodec: alphabet^L does not fit in 64 bits");
    }
    powers_[i] = powers_[i + 1] * alphabet;
  }
  if (powers_[0] > std::numeric_limits<std::uint64_t>::max() / alphabet) {
    throw BudgetError("BlockCodec: alphabet^L does not fit in 64 bits");
  }
}

std::uint64_t BlockCodec::encode(std::span<const std::uint32_t> block) const {
  if (block.size() != L_) throw DomainError("BlockCodec: wrong block length");
  std::uint64_t key = 0;
  for (auto v : block) {
    if (v >= alphabet_) throw DomainError("BlockCodec: symbol outside the alphabet");
    key = key * alphabet_ + v;
  }
  return key;
}

Block BlockCodec::decode(std::uint64_t key) const {
  Block out(L_);
  for (std::size_t i = L_; i-- > 0;) {
    out[i] = static_cast<std::uint32_t>(key % alphabet_);
    key /= alphabet_;
  }
  return out;
}

std::uint32_t BlockCodec::digit(std::uint64_t key, std::size_t i) const {
  return static_cast<std::uint32_t>((key / powers_[i]) % alphabet_);
}

unsigned BlockCodec::distance(std::uint64_t a, std::uint64_t b) const {
  unsigned d = 0;
  for (std::size_t i = 0; i < L_; ++i) {
    d += (a % alphabet_) != (b % alphabet_) ? 1U : 0U;
    a /= alphabet_;
    b /= alphabet_;
  }
  return d;
}

BlockDistribution BlockDistribution::from_masses(std::size_t L, std::uint64_t alphabet,
                                                 std::vector<std::pair<std::uint64_t, double>> entries) {
  BlockDistribution out;
  out.L = L;
  out.alphabet = alphabet;
  std::sort(entries.begin(), entries.end());
  for (const auto& [key, m] : entries) {
    if (m < 0.0) throw DomainError("BlockDistribution: negative mass");
    if (m == 0.0) continue;
    if (!out.keys.empty() && out.keys.back() == key) {
      out.mass.back() += m;
    } else {
      out.keys.push_back(key);
      out.mass.push_back(m);
    }
  }
  return out;
}

BlockDistribution BlockDistribution::from_blocks(std::size_t L, std::uint64_t alphabet,
                                                 const std::vector<Block>& blocks, std::span<const double> masses) {
  if (blocks.size() != masses.size()) throw DomainError("BlockDistribution: blocks and masses differ in size");
  const BlockCodec codec(L, alphabet);
  std::vector<std::pair<std::uint64_t, double>> entries;
  entries.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) entries.emplace_back(codec.encode(blocks[i]), masses[i]);
  return from_masses(L, alphabet, std::move(entries));
}

BlockDistribution BlockDistribution::from_samples(std::size_t L, std::uint64_t alphabet,
                                                  std::vector<std::uint64_t> samples) {
  BlockDistribution out;
  out.L = L;
  out.alphabet = alphabet;
  out.total = samples.size();
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    out.keys.push_back(samples[i]);
    out.counts.push_back(j - i);
    out.mass.push_back(static_cast<double>(j - i) / static_cast<double>(samples.size()));
    i = j;
  }
  return out;
}

void BlockDistribution::validate() const {
  (void)codec();
  if (keys.size() != mass.size()) throw DomainError("BlockDistribution: keys and masses differ in size");
  if (keys.empty()) throw DomainError("BlockDistribution: empty support");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && keys[i] <= keys[i - 1]) throw DomainError("BlockDistribution: keys not sorted and distinct");
    if (!(mass[i] >= 0.0)) throw DomainError("BlockDistribution: negative mass");
  }
  if (empirical()) {
    if (counts.size() != keys.size() || std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) != total) {
      throw DomainError("BlockDistribution: counts do not add up to the total");
    }
    return;
  }
  double sum = 0.0, c = 0.0;
  for (double m : mass) {
    const double y = m - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("BlockDistribution: masses do not sum to 1");
}

double TransportPlan::cost() const {
  const BlockCodec codec(L, alphabet);
  double total = 0.0;
  for (const auto& e : entries) total += e.mass * codec.distance(e.a, e.b);
  return total / static_cast<double>(L);
}

double TransportPlan::marginal_error(const BlockDistribution& P, const BlockDistribution& Q) const {
  std::vector<std::pair<std::uint64_t, double>> row, col;
  for (const auto& e : entries) {
    row.emplace_back(e.a, e.mass);
    col.emplace_back(e.b, e.mass);
  }
  auto deviation = [](std::vector<std::pair<std::uint64_t, double>> xs, const BlockDistribution& D) {
    std::sort(xs.begin(), xs.end());
    double worst = 0.0;
    std::size_t i = 0, j = 0;
    while (i < xs.size() || j < D.keys.size()) {
      const std::uint64_t key = j >= D.keys.size() || (i < xs.size() && xs[i].first < D.keys[j]) ? xs[i].first
                                                                                                  : D.keys[j];
      double have = 0.0;
      while (i < xs.size() && xs[i].first == key) have += xs[i++].second;
      double want = 0.0;
      if (j < D.keys.size() && D.keys[j] == key) want = D.mass[j++];
      worst = std::max(worst, std::abs(have - want));
    }
    return worst;
  };
  return std::max(deviation(std::move(row), P), deviation(std::move(col), Q));
}

std::string TransportPlan::to_csv() const {
  const BlockCodec codec(L, alphabet);
  auto write_block = [&](std::ostringstream& out, std::uint64_t key) {
    const auto digits = codec.decode(key);
    for (std::size_t i = 0; i < digits.size(); ++i) out << (i ? ":" : "") << digits[i];
  };
  std::ostringstream out;
  out.precision(17);
  out << "blockA,blockB,mass\n";
  for (const auto& e : entries) {
    write_block(out, e.a);
    out << ',';
    write_block(out, e.b);
    out << ',' << e.mass << '\n';
  }
  return out.str();
}

namespace {

template <class Flow>
struct Residual {
  std::vector<std::uint64_t> keys;
  std::vector<Flow> mass;
};

template <class Flow>
struct RoutedFlow {
  struct Piece {
    std::size_t a = 0;
    std::size_t b = 0;
    Flow amount{};
  };
  std::vector<Piece> pieces;
  std::size_t arcs = 0;
  int phases = 0;
};

template <class Flow>
RoutedFlow<Flow> route_dense(const BlockCodec& codec, const Residual<Flow>& A, const Residual<Flow>& B, Flow eps) {
  using Solver = transport::MinCostFlow<Flow>;
  const int na = static_cast<int>(A.keys.size());
  const int nb = static_cast<int>(B.keys.size());
  Solver g(2 + na + nb);
  const int s = 0, t = 1 + na + nb;
  g.reserve_arcs(static_cast<std::size_t>(na) * static_cast<std::size_t>(nb) + static_cast<std::size_t>(na + nb));
  for (int i = 0; i < na; ++i) g.add_arc(s, 1 + i, 0, A.mass[static_cast<std::size_t>(i)]);
  for (int j = 0; j < nb; ++j) g.add_arc(1 + na + j, t, 0, B.mass[static_cast<std::size_t>(j)]);
  std::vector<int> middle;
  middle.reserve(static_cast<std::size_t>(na) * static_cast<std::size_t>(nb));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const auto d = codec.distance(A.keys[static_cast<std::size_t>(i)], B.keys[static_cast<std::size_t>(j)]);
      middle.push_back(g.add_arc(1 + i, 1 + na + j, static_cast<std::int32_t>(d), Solver::infinite()));
    }
  }
  const auto result = g.solve(s, t, eps);
  RoutedFlow<Flow> out;
  out.arcs = g.arc_count() / 2;
  out.phases = result.phases;
  for (int arc : middle) {
    const Flow f = g.flow(arc);
    if (f > eps) {
      out.pieces.push_back({static_cast<std::size_t>(g.arc_from(arc) - 1),
                            static_cast<std::size_t>(g.arc_to(arc) - 1 - na), f});
    }
  }
  return out;
}

struct PatternEntry {
  std::uint64_t pattern;
  std::uint32_t point;
  std::uint32_t wildcards;
  bool operator<(const PatternEntry& o) const {
    return pattern != o.pattern ? pattern < o.pattern : point < o.point;
  }
};

std::vector<PatternEntry> patterns_of(const BlockCodec& codec, const std::vector<std::uint64_t>& keys) {
  const std::size_t L = codec.length();
  const std::uint64_t base = codec.alphabet() + 1;
  const std::uint64_t wildcard = codec.alphabet();
  std::vector<std::uint64_t> power(L, 1);
  for (std::size_t i = L - 1; i-- > 0;) power[i] = power[i + 1] * base;
  std::vector<PatternEntry> out;
  out.reserve(keys.size() * ((std::size_t{1} << L) - 1));
  std::vector<std::uint32_t> digits(L);
  for (std::size_t p = 0; p < keys.size(); ++p) {
    std::uint64_t plain = 0;
    for (std::size_t i = 0; i < L; ++i) {
      digits[i] = codec.digit(keys[p], i);
      plain += digits[i] * power[i];
    }
    for (std::uint32_t mask = 1; mask < (1U << L); ++mask) {
      std::uint64_t key = plain;
      for (std::size_t i = 0; i < L; ++i) {
        if (mask & (1U << i)) key += (wildcard - digits[i]) * power[i];
      }
      out.push_back({key, static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(std::popcount(mask))});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <class Flow>
RoutedFlow<Flow> route_patterns(const BlockCodec& codec, const Residual<Flow>& A, const Residual<Flow>& B,
                                Flow eps) {
  using Solver = transport::MinCostFlow<Flow>;
  if (codec.length() > 16) throw BudgetError("dbar: pattern route supports L <= 16");
  (void)BlockCodec(codec.length(), codec.alphabet() + 1);  // pattern keys must fit in 64 bits

  const auto pa = patterns_of(codec, A.keys);
  const auto pb = patterns_of(codec, B.keys);

  const int na = static_cast<int>(A.keys.size());
  const int nb = static_cast<int>(B.keys.size());
  Solver g(2 + na + nb);
  const int s = 0, t = 1 + na + nb;
  for (int i = 0; i < na; ++i) g.add_arc(s, 1 + i, 0, A.mass[static_cast<std::size_t>(i)]);
  for (int j = 0; j < nb; ++j) g.add_arc(1 + na + j, t, 0, B.mass[static_cast<std::size_t>(j)]);

  struct PatternArcs {
    std::size_t in_begin, in_end, out_begin, out_end;
  };
  std::vector<int> in_arcs, out_arcs;
  std::vector<PatternArcs> nodes;
  std::size_t i = 0, j = 0;
  while (i < pa.size() && j < pb.size()) {
    if (pa[i].pattern < pb[j].pattern) {
      ++i;
    } else if (pb[j].pattern < pa[i].pattern) {
      ++j;
    } else {
      const std::uint64_t key = pa[i].pattern;
      const int node = g.add_node();
      PatternArcs arcs{in_arcs.size(), 0, out_arcs.size(), 0};
      for (; i < pa.size() && pa[i].pattern == key; ++i) {
        in_arcs.push_back(g.add_arc(1 + static_cast<int>(pa[i].point), node,
                                    static_cast<std::int32_t>(pa[i].wildcards), Solver::infinite()));
      }
      for (; j < pb.size() && pb[j].pattern == key; ++j) {
        out_arcs.push_back(g.add_arc(node, 1 + na + static_cast<int>(pb[j].point), 0, Solver::infinite()));
      }
      arcs.in_end = in_arcs.size();
      arcs.out_end = out_arcs.size();
      nodes.push_back(arcs);
    }
  }

  const auto result = g.solve(s, t, eps);
  RoutedFlow<Flow> out;
  out.arcs = g.arc_count() / 2;
  out.phases = result.phases;
  // Split each pattern's throughput into (a, b) pieces by pairing inflows
  // with outflows in arc order.
  for (const auto& node : nodes) {
    std::size_t q = node.out_begin;
    Flow left_out = q < node.out_end ? g.flow(out_arcs[q]) : Flow{};
    for (std::size_t p = node.in_begin; p < node.in_end; ++p) {
      Flow left_in = g.flow(in_arcs[p]);
      while (left_in > eps && q < node.out_end) {
        if (!(left_out > eps)) {
          if (++q >= node.out_end) break;
          left_out = g.flow(out_arcs[q]);
          continue;
        }
        const Flow f = std::min(left_in, left_out);
        out.pieces.push_back({static_cast<std::size_t>(g.arc_from(in_arcs[p]) - 1),
                              static_cast<std::size_t>(g.arc_to(out_arcs[q]) - 1 - na), f});
        left_in -= f;
        left_out -= f;
      }
    }
  }
  return out;
}

constexpr std::size_t kDenseLimit = 4'000'000;

template <class Flow>
DbarResult solve(const BlockDistribution& P, const BlockDistribution& Q, const std::vector<Flow>& mp,
                 const std::vector<Flow>& mq, Flow total, Flow eps, DbarRoute route) {
  const BlockCodec codec(P.L, P.alphabet);
  DbarResult out;
  out.plan.L = P.L;
  out.plan.alphabet = P.alphabet;
  auto to_mass = [&](Flow f) { return static_cast<double>(f) / static_cast<double>(total); };

  Residual<Flow> A, B;
  std::size_t i = 0, j = 0;
  while (i < P.keys.size() || j < Q.keys.size()) {
    if (j >= Q.keys.size() || (i < P.keys.size() && P.keys[i] < Q.keys[j])) {
      A.keys.push_back(P.keys[i]);
      A.mass.push_back(mp[i++]);
    } else if (i >= P.keys.size() || Q.keys[j] < P.keys[i]) {
      B.keys.push_back(Q.keys[j]);
      B.mass.push_back(mq[j++]);
    } else {
      const Flow common = std::min(mp[i], mq[j]);
      if (common > Flow{}) out.plan.entries.push_back({P.keys[i], Q.keys[j], to_mass(common)});
      if (mp[i] - common > eps) {
        A.keys.push_back(P.keys[i]);
        A.mass.push_back(mp[i] - common);
      }
      if (mq[j] - common > eps) {
        B.keys.push_back(Q.keys[j]);
        B.mass.push_back(mq[j] - common);
      }
      ++i;
      ++j;
    }
  }
  out.residual_support_a = A.keys.size();
  out.residual_support_b = B.keys.size();
  if (A.keys.empty() || B.keys.empty()) {
    out.solver = "identity";
    out.value = 0.0;
    return out;
  }

  if (route == DbarRoute::Auto) {
    bool patterns_fit = P.L <= 16;
    try {
      (void)BlockCodec(P.L, P.alphabet + 1);
    } catch (const BudgetError&) {
      patterns_fit = false;
    }
    route = A.keys.size() * B.keys.size() <= kDenseLimit || !patterns_fit ? DbarRoute::Dense : DbarRoute::Patterns;
  }
  const auto routed = route == DbarRoute::Dense ? route_dense(codec, A, B, eps) : route_patterns(codec, A, B, eps);
  out.solver = route == DbarRoute::Dense ? "dense" : "patterns";
  out.arcs = routed.arcs;
  out.phases = routed.phases;

  std::vector<std::pair<std::pair<std::uint64_t, std::uint64_t>, Flow>> pieces;
  pieces.reserve(routed.pieces.size());
  for (const auto& piece : routed.pieces) pieces.push_back({{A.keys[piece.a], B.keys[piece.b]}, piece.amount});
  std::sort(pieces.begin(), pieces.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  Flow weighted{};
  for (std::size_t p = 0; p < pieces.size();) {
    Flow sum{};
    std::size_t q = p;
    for (; q < pieces.size() && pieces[q].first == pieces[p].first; ++q) sum += pieces[q].second;
    const auto [a, b] = pieces[p].first;
    weighted += sum * static_cast<Flow>(codec.distance(a, b));
    out.plan.entries.push_back({a, b, to_mass(sum)});
    p = q;
  }
  std::sort(out.plan.entries.begin(), out.plan.entries.end(),
            [](const auto& x, const auto& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
  if constexpr (std::is_integral_v<Flow>) {
    out.value = static_cast<double>(static_cast<long double>(weighted) /
                                    (static_cast<long double>(total) * static_cast<long double>(P.L)));
  } else {
    out.value = weighted / (total * static_cast<double>(P.L));
  }
  out.value = std::clamp(out.value, 0.0, 1.0);
  return out;
}

}  // namespace

DbarResult dbar_L_exact(const BlockDistribution& P, const BlockDistribution& Q, DbarRoute route) {
  if (P.L != Q.L) throw DomainError("dbar_L_exact: block lengths differ");
  if (P.alphabet != Q.alphabet) throw DomainError("dbar_L_exact: alphabets differ");
  P.validate();
  Q.validate();

  if (P.empirical() && Q.empirical()) {
    // Exact integer masses on the common denominator lcm(N_P, N_Q).
    const std::uint64_t g = std::gcd(P.total, Q.total);
    const std::uint64_t scale_p = Q.total / g, scale_q = P.total / g;
    if (P.total > (std::uint64_t{1} << 62) / scale_p) throw BudgetError("dbar_L_exact: sample sizes too large");
    std::vector<std::int64_t> mp(P.counts.size()), mq(Q.counts.size());
    for (std::size_t i = 0; i < mp.size(); ++i) mp[i] = static_cast<std::int64_t>(P.counts[i] * scale_p);
    for (std::size_t i = 0; i < mq.size(); ++i) mq[i] = static_cast<std::int64_t>(Q.counts[i] * scale_q);
    return solve<std::int64_t>(P, Q, mp, mq, static_cast<std::int64_t>(P.total * scale_p), 0, route);
  }
  return solve<double>(P, Q, P.mass, Q.mass, 1.0, 1e-15, route);
}

std::vector<std::uint64_t> harvest_blocks(std::span<const std::uint32_t> values, std::size_t L, std::uint32_t ell) {
  if (L == 0) throw DomainError("harvest_blocks: L must be positive");
  if (values.size() < L) return {};
  const BlockCodec codec(L, std::uint64_t{ell} + 1);
  const std::size_t count = values.size() - L + 1;
  std::vector<std::uint64_t> out(count);
  const std::size_t chunks = std::min<std::size_t>(count, 64);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = count * c / chunks, end = count * (c + 1) / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      std::uint64_t key = 0;
      for (std::size_t j = 0; j < L; ++j) key = key * (std::uint64_t{ell} + 1) + std::min(values[i + j], ell);
      out[i] = key;
    }
  });
  return out;
}

EmpiricalDbar dbar_L_empirical(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b, std::size_t L,
                               std::uint32_t ell, std::size_t block_floor) {
  auto blocks_a = harvest_blocks(a, L, ell);
  auto blocks_b = harvest_blocks(b, L, ell);
  if (blocks_a.size() < block_floor || blocks_b.size() < block_floor || blocks_a.empty() || blocks_b.empty()) {
    throw InsufficientSampleError("dbar_L_empirical: " + std::to_string(std::min(blocks_a.size(), blocks_b.size())) +
                                  " blocks, below the floor of " + std::to_string(block_floor));
  }
  EmpiricalDbar out;
  out.L = L;
  out.ell = ell;
  out.blocks_a = blocks_a.size();
  out.blocks_b = blocks_b.size();
  const auto P = BlockDistribution::from_samples(L, std::uint64_t{ell} + 1, std::move(blocks_a));
  const auto Q = BlockDistribution::from_samples(L, std::uint64_t{ell} + 1, std::move(blocks_b));
  out.support_a = P.keys.size();
  out.support_b = Q.keys.size();
  const auto result = dbar_L_exact(P, Q);
  out.value = result.value;
  out.solver = result.solver;
  return out;
}

EmpiricalDbar dbar_L_empirical(const CountWindow& a, const CountWindow& b, std::size_t L, std::uint32_t ell,
                               std::size_t block_floor) {
  return dbar_L_empirical(std::span<const std::uint32_t>(a.values), std::span<const std::uint32_t>(b.values), L, ell,
                          block_floor);
}

ConditionalBound dbar_upper_conditional(double bad_mass, double max_l1) {
  ConditionalBound out;
  out.epsilon = std::max(bad_mass, max_l1);
  out.bound = 3.0 * out.epsilon;
  out.caveat =
      "Monte Carlo: eps is estimated from sampled enriched pasts, so the bound holds up to sampling error";
  return out;
}

CountWindow truncate(const CountWindow& window, std::uint32_t ell) {
  CountWindow out = window;
  for (auto& v : out.values) v = std::min(v, ell);
  return out;
}

}  // namespace ptower
