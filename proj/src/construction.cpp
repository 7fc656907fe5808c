#include "ptower/construction.hpp"

#include <algorithm>
#include <sstream>

#include "ptower/errors.hpp"
#include "ptower/rng.hpp"

namespace ptower {
namespace {

BigInt pow2(unsigned e) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, e);
  return r;
}

Rational dyadic(const BigInt& num, unsigned level) {
  Rational q(num, pow2(level));
  q.canonicalize();
  return q;
}

bool is_power_of_two(const BigInt& d) { return d > 0 && mpz_popcount(d.get_mpz_t()) == 1; }

}  // namespace

DyadicPoint::DyadicPoint(BigInt numerator, unsigned level) : numerator_(std::move(numerator)), level_(level) {
  if (numerator_ < 0 || numerator_ >= pow2(level_)) {
    throw DomainError("DyadicPoint: numerator outside [0, 2^level)");
  }
  if (numerator_ == 0) {
    level_ = 0;
    return;
  }
  const auto twos = mpz_scan1(numerator_.get_mpz_t(), 0);
  if (twos > 0) {
    mpz_fdiv_q_2exp(numerator_.get_mpz_t(), numerator_.get_mpz_t(), twos);
    level_ -= static_cast<unsigned>(twos);
  }
}

DyadicPoint DyadicPoint::from_rational(const Rational& q) {
  Rational c = q;
  c.canonicalize();
  if (!is_power_of_two(c.get_den())) throw DomainError("DyadicPoint: denominator is not a power of two");
  const auto level = static_cast<unsigned>(mpz_scan1(c.get_den().get_mpz_t(), 0));
  return DyadicPoint(c.get_num(), level);
}

Rational DyadicPoint::value() const { return dyadic(numerator_, level_); }

unsigned DyadicPoint::leading_ones() const {
  unsigned k = 0;
  while (k < level_ && mpz_tstbit(numerator_.get_mpz_t(), level_ - 1 - k)) ++k;
  return k;
}

std::string DyadicPoint::to_string() const {
  if (numerator_ == 0) return "0";
  return numerator_.get_str() + "/2^" + std::to_string(level_);
}

bool operator==(const DyadicPoint& a, const DyadicPoint& b) {
  return a.level_ == b.level_ && a.numerator_ == b.numerator_;
}

DyadicPoint odometer_apply(const DyadicPoint& x) {
  const unsigned k = x.leading_ones();
  const unsigned level = std::max(x.level(), k + 1);
  // x - 1 + 2^{-k} + 2^{-k-1}, scaled by 2^level.
  BigInt num = x.numerator() * pow2(level - x.level());
  num += pow2(level - k) + pow2(level - k - 1) - pow2(level);
  return DyadicPoint(std::move(num), level);
}

DyadicPoint odometer_inverse(const DyadicPoint& x) {
  if (x.numerator() == 0) throw DomainError("odometer_inverse: 0 has no dyadic preimage");
  const unsigned bits = static_cast<unsigned>(mpz_sizeinbase(x.numerator().get_mpz_t(), 2));
  const unsigned k = x.level() - bits;  // x in [2^{-k-1}, 2^{-k})
  const unsigned level = x.level();
  BigInt num = x.numerator() + pow2(level) - pow2(level - k) - pow2(level - k - 1);
  return DyadicPoint(std::move(num), level);
}

Interval base_set(unsigned n) {
  if (n == 0) throw DomainError("base_set: stages start at 1");
  return {Rational(1) - dyadic(1, n - 1), Rational(1) - dyadic(1, n)};
}

// ---------------------------------------------------------------------------
// Schedule

StageSchedule::StageSchedule(std::vector<StageParams> stages) : stages_(std::move(stages)) { validate(); }

StageSchedule StageSchedule::standard(unsigned stages, std::uint64_t k) {
  return standard(std::vector<std::uint64_t>(stages, k));
}

StageSchedule StageSchedule::standard(const std::vector<std::uint64_t>& ks) {
  std::vector<StageParams> out;
  for (std::size_t i = 0; i < ks.size(); ++i) out.push_back({2 + 4 * i, ks[i]});
  return StageSchedule(std::move(out));
}

void StageSchedule::validate() const {
  if (stages_.empty()) throw FormatError("schedule: no stages");
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (stages_[i].M < 1) throw FormatError("schedule: M." + std::to_string(i + 1) + " must be positive");
    if (stages_[i].k < 1) throw FormatError("schedule: k." + std::to_string(i + 1) + " must be positive");
    if (i > 0 && stages_[i].M <= stages_[i - 1].M) {
      throw FormatError("schedule: M must be strictly increasing (M." + std::to_string(i + 1) + ")");
    }
  }
}

const StageParams& StageSchedule::at(unsigned n) const {
  if (n < 1 || n > stages_.size()) throw DomainError("schedule: stage " + std::to_string(n) + " not defined");
  return stages_[n - 1];
}

std::uint64_t StageSchedule::R(unsigned n) const {
  std::uint64_t r = 0;
  for (unsigned i = 1; i <= n; ++i) r = std::max(r, M(i) + k(i) - 1);
  return r;
}

StageSchedule StageSchedule::from_key_values(const KeyValues& kv) {
  std::map<unsigned, std::uint64_t> ms, ks;
  for (const auto& [key, value] : kv.entries()) {
    if (key.size() < 3 || key[1] != '.' || (key[0] != 'M' && key[0] != 'k')) continue;
    if (!std::all_of(key.begin() + 2, key.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    unsigned n = 0;
    try {
      std::size_t used = 0;
      n = static_cast<unsigned>(std::stoul(key.substr(2), &used));
      if (used != key.size() - 2) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw FormatError("schedule: bad stage index in `" + key + "`");
    }
    if (n < 1) throw FormatError("schedule: stages start at 1 (`" + key + "`)");
    const auto v = *kv.get_uint(key);
    (key[0] == 'M' ? ms : ks)[n] = v;
  }
  if (ms.empty()) throw FormatError("schedule: no `M.n` keys");
  std::vector<StageParams> stages;
  for (unsigned n = 1; n <= std::max(ms.rbegin()->first, ks.empty() ? 0 : ks.rbegin()->first); ++n) {
    if (!ms.count(n) || !ks.count(n)) throw FormatError("schedule: stage " + std::to_string(n) + " needs M and k");
    stages.push_back({ms[n], ks[n]});
  }
  StageSchedule s(std::move(stages));
  const char* names[] = {"asymptotic.M_scale", "asymptotic.M_base", "asymptotic.k_scale", "asymptotic.k_base"};
  bool any = false;
  for (auto* name : names) any = any || kv.contains(name);
  if (any) {
    AsymptoticRule rule;
    rule.m_scale = kv.get_double(names[0]).value_or(1.0);
    rule.m_base = kv.get_double(names[1]).value_or(1.0);
    rule.k_scale = kv.get_double(names[2]).value_or(1.0);
    rule.k_base = kv.get_double(names[3]).value_or(1.0);
    s.set_asymptotic(rule);
  }
  return s;
}

StageSchedule StageSchedule::parse(std::string_view text) {
  const auto kv = KeyValues::parse(text);
  auto s = from_key_values(kv);
  if (auto extra = kv.unconsumed(); !extra.empty()) throw FormatError("schedule: unknown key `" + extra.front() + "`");
  return s;
}

StageSchedule StageSchedule::load(const std::string& path) {
  const auto kv = KeyValues::load(path);
  auto s = from_key_values(kv);
  if (auto extra = kv.unconsumed(); !extra.empty()) throw FormatError("schedule: unknown key `" + extra.front() + "`");
  return s;
}

std::string StageSchedule::to_text() const {
  std::ostringstream out;
  for (unsigned n = 1; n <= size(); ++n) {
    out << "M." << n << " = " << M(n) << "\n";
    out << "k." << n << " = " << k(n) << "\n";
  }
  if (asymptotic_) {
    out << "asymptotic.M_scale = " << asymptotic_->m_scale << "\n";
    out << "asymptotic.M_base = " << asymptotic_->m_base << "\n";
    out << "asymptotic.k_scale = " << asymptotic_->k_scale << "\n";
    out << "asymptotic.k_base = " << asymptotic_->k_base << "\n";
  }
  return out.str();
}

std::string StageSchedule::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

Rational StageSchedule::finite_measure_through(unsigned n) const {
  Rational total = 0;
  for (unsigned i = 1; i <= n; ++i) {
    total += dyadic(1, i) * (Rational(M(i)) + Rational(k(i) - 1, 2));
  }
  return total;
}

std::optional<bool> StageSchedule::infinite_measure() const {
  if (!asymptotic_) return std::nullopt;
  return ptower::infinite_measure(*asymptotic_);
}

bool infinite_measure(const AsymptoticRule& rule) {
  // 2^{-n} c b^n is summable iff b < 2.
  return (rule.m_scale > 0.0 && rule.m_base >= 2.0) || (rule.k_scale > 0.0 && rule.k_base >= 2.0);
}

// ---------------------------------------------------------------------------
// Towers and return maps

Tower tower(unsigned n, const Budget& budget) {
  if (n < 1) throw DomainError("tower: n must be at least 1");
  if (n >= 63 || (std::size_t{1} << n) > budget.rungs) {
    throw BudgetError("tower: 2^" + std::to_string(n) + " rungs exceed the rung budget");
  }
  Tower t;
  t.n = n;
  const std::size_t height = std::size_t{1} << n;
  t.rungs.reserve(height);
  const Rational width = dyadic(1, n);
  DyadicPoint left;
  for (std::size_t i = 0; i < height; ++i) {
    const Rational l = left.value();
    t.rungs.push_back({l, l + width});
    if (i + 1 < height) left = odometer_apply(left);
  }
  return t;
}

std::uint64_t ReturnTimeMap::lookup(const Rational& x) const {
  auto it = std::upper_bound(pieces.begin(), pieces.end(), x,
                             [](const Rational& v, const ReturnPiece& p) { return v < p.interval.left; });
  if (it == pieces.begin()) throw DomainError("return map: point below A_" + std::to_string(stage));
  --it;
  if (!it->interval.contains(x)) throw DomainError("return map: point outside A_" + std::to_string(stage));
  return it->r;
}

std::string ReturnTimeMap::to_csv(bool header) const {
  std::ostringstream out;
  if (header) out << "stage,left_num,left_den,right_num,right_den,r\n";
  for (const auto& p : pieces) {
    out << stage << ',' << p.interval.left.get_num().get_str() << ',' << p.interval.left.get_den().get_str() << ','
        << p.interval.right.get_num().get_str() << ',' << p.interval.right.get_den().get_str() << ',' << p.r << '\n';
  }
  return out.str();
}

std::map<Label, double> LabelLaw::black_marginal() const {
  std::map<Label, double> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) out[pairs[i].black] += probability[i];
  return out;
}

std::map<Label, double> LabelLaw::white_marginal() const {
  std::map<Label, double> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) out[pairs[i].white] += probability[i];
  return out;
}

Construction::Construction(StageSchedule schedule, unsigned through_stage, Budget budget)
    : schedule_(std::move(schedule)), budget_(budget) {
  if (through_stage > schedule_.size()) {
    throw DomainError("construction: schedule has only " + std::to_string(schedule_.size()) + " stages");
  }
  for (unsigned n = 1; n <= through_stage; ++n) maps_.push_back(build_stage(n));
}

const ReturnTimeMap& Construction::return_map(unsigned n) const {
  if (n < 1 || n > maps_.size()) throw DomainError("construction: stage " + std::to_string(n) + " not built");
  return maps_[n - 1];
}

std::uint64_t Construction::return_time(const DyadicPoint& x) const {
  return return_map(x.stage()).lookup(x.value());
}

std::vector<LabeledCell> Construction::label_cells(unsigned n) const {
  if (n < 1 || n > maps_.size() + 1) {
    throw DomainError("label_cells: stages below " + std::to_string(n) + " are not built");
  }
  const Interval a_n = base_set(n);
  if (n == 1) return {LabeledCell{a_n, {}}};

  const Tower tw = tower(n, budget_);
  const std::size_t half = tw.base_rung_index();  // 2^{n-1}
  const std::size_t height = tw.height();

  // Rungs other than A_n and the roof, with the stage each lies in and its
  // translation offset relative to A_n (S acts on rungs by translation).
  struct RungInfo {
    std::size_t index;
    const ReturnTimeMap* map;
    Rational offset;
  };
  std::vector<RungInfo> rungs;
  for (std::size_t i = 1; i < height; ++i) {
    if (i == half) continue;
    const auto& rung = tw.rung(i);
    const unsigned m = DyadicPoint::from_rational(rung.left).stage();
    rungs.push_back({i, &return_map(m), rung.left - a_n.left});
  }

  std::vector<Rational> cuts{a_n.left, a_n.right};
  for (const auto& info : rungs) {
    const auto& pieces = info.map->pieces;
    const Rational lo = a_n.left + info.offset;
    const Rational hi = a_n.right + info.offset;
    auto it = std::upper_bound(pieces.begin(), pieces.end(), lo,
                               [](const Rational& v, const ReturnPiece& p) { return v < p.interval.left; });
    for (; it != pieces.end() && it->interval.left < hi; ++it) cuts.push_back(it->interval.left - info.offset);
    if (cuts.size() > budget_.pieces) throw BudgetError("label_cells: cell count exceeds the piece budget");
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<LabeledCell> cells;
  cells.reserve(cuts.size() - 1);
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    LabeledCell cell{{cuts[c], cuts[c + 1]}, {}};
    cell.labels.black.reserve(half - 1);
    cell.labels.white.reserve(half - 1);
    for (const auto& info : rungs) {
      const auto r = static_cast<std::uint32_t>(info.map->lookup(cell.interval.left + info.offset));
      (info.index < half ? cell.labels.black : cell.labels.white).push_back(r);
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

ReturnTimeMap Construction::build_stage(unsigned n) const {
  const auto cells = label_cells(n);
  const std::uint64_t M = schedule_.M(n);
  const std::uint64_t k = schedule_.k(n);

  // Atoms in order of their leftmost cell.
  std::map<LabelPair, std::size_t> atom_of;
  std::vector<std::vector<std::size_t>> atoms;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto [it, fresh] = atom_of.try_emplace(cells[c].labels, atoms.size());
    if (fresh) atoms.emplace_back();
    atoms[it->second].push_back(c);
  }
  if (atoms.size() * k + cells.size() > budget_.pieces) {
    throw BudgetError("build_return_map: stage " + std::to_string(n) + " needs more pieces than the budget");
  }

  ReturnTimeMap map;
  map.stage = n;
  for (const auto& atom : atoms) {
    Rational total = 0;
    for (auto c : atom) total += cells[c].interval.length();
    const Rational step = total / Rational(k);
    // Cut the atom, read left to right across its cells, into k equal parts.
    Rational consumed = 0;
    std::uint64_t j = 1;
    for (auto c : atom) {
      Rational left = cells[c].interval.left;
      const Rational& right = cells[c].interval.right;
      while (left < right) {
        while (j < k && Rational(j) * step <= consumed) ++j;
        const Rational end_consumed = consumed + (right - left);
        const Rational boundary = Rational(j) * step;
        if (j < k && boundary < end_consumed) {
          const Rational cut = left + (boundary - consumed);
          map.pieces.push_back({{left, cut}, M + j - 1});
          consumed = boundary;
          left = cut;
        } else {
          map.pieces.push_back({{left, right}, M + j - 1});
          consumed = end_consumed;
          left = right;
        }
      }
    }
  }
  std::sort(map.pieces.begin(), map.pieces.end(),
            [](const ReturnPiece& a, const ReturnPiece& b) { return a.interval.left < b.interval.left; });
  return map;
}

LabelPair Construction::label_of(const DyadicPoint& y, unsigned n) const {
  if (y.stage() != n) throw DomainError("label_of: point " + y.to_string() + " is not in A_" + std::to_string(n));
  if (n > maps_.size() + 1) throw DomainError("label_of: earlier stages not built");
  const std::size_t len = (std::size_t{1} << (n - 1)) - 1;
  LabelPair out;
  out.black.resize(len);
  DyadicPoint x = y;
  for (std::size_t i = 0; i < len; ++i) {
    x = odometer_inverse(x);
    out.black[len - 1 - i] = static_cast<std::uint32_t>(return_time(x));
  }
  x = y;
  out.white.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    x = odometer_apply(x);
    out.white.push_back(static_cast<std::uint32_t>(return_time(x)));
  }
  return out;
}

LabelLaw Construction::label_law(unsigned n) const {
  const auto cells = label_cells(n);
  const Rational scale = Rational(pow2(n));  // 1 / mu(A_n)
  std::map<LabelPair, Rational> mass;
  for (const auto& cell : cells) mass[cell.labels] += cell.interval.length() * scale;
  LabelLaw law;
  law.stage = n;
  for (auto& [pair, m] : mass) {
    law.pairs.push_back(pair);
    law.probability.push_back(m.get_d());
    law.mass.push_back(std::move(m));
  }
  return law;
}

DyadicPoint Construction::random_point(unsigned n, std::uint64_t bits_word, unsigned extra_bits) const {
  if (extra_bits > 64) throw DomainError("random_point: at most 64 random digits");
  const unsigned level = n + extra_bits;
  BigInt num = (pow2(n) - 2) * pow2(extra_bits);
  if (extra_bits > 0) {
    BigInt tail;
    mpz_set_ui(tail.get_mpz_t(), static_cast<unsigned long>(bits_word >> (64 - extra_bits)));
    num += tail;
  }
  return DyadicPoint(std::move(num), level);
}

LabelLaw Construction::sample_label_law(unsigned n, std::size_t samples, std::uint64_t seed) const {
  if (samples == 0) throw DomainError("sample_label_law: need at least one sample");
  Rng rng(seed);
  std::map<LabelPair, std::size_t> counts;
  for (std::size_t s = 0; s < samples; ++s) ++counts[label_of(random_point(n, rng()), n)];
  LabelLaw law;
  law.stage = n;
  law.sampled = true;
  law.samples = samples;
  for (const auto& [pair, c] : counts) {
    law.pairs.push_back(pair);
    law.probability.push_back(static_cast<double>(c) / static_cast<double>(samples));
  }
  return law;
}

Rational Construction::kac_total() const {
  Rational total = 0;
  for (const auto& map : maps_) {
    for (const auto& p : map.pieces) total += p.interval.length() * Rational(p.r);
  }
  return total;
}

}  // namespace ptower
