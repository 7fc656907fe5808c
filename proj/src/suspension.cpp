#include "ptower/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "ptower/errors.hpp"
#include "ptower/rng.hpp"

namespace ptower {

std::string CountWindow::to_csv() const {
  std::ostringstream out;
  out << "# stage=" << stage << " linked=" << (linked ? 1 : 0) << " schedule=" << schedule_hash << " seed=" << seed
      << "\n";
  out << "site,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << first + static_cast<std::int64_t>(i) << ',' << values[i] << '\n';
  return out.str();
}

StageLemmaParams stage_lemma_params(const Construction& construction, unsigned n) {
  LabelLaw law;
  try {
    law = construction.label_law(n);
  } catch (const BudgetError&) {
    const auto seed = seed_split(0, {"label-law", construction.schedule().hash(), std::to_string(n)});
    law = construction.sample_label_law(n, kSampledLabelLawSize, seed);
  }
  return stage_lemma_params(construction, n, law);
}

StageLemmaParams stage_lemma_params(const Construction& construction, unsigned n, const LabelLaw& law) {
  const auto& schedule = construction.schedule();
  if (law.stage != n) throw DomainError("stage_lemma_params: label law belongs to another stage");
  StageLemmaParams out;
  out.stage = n;
  out.params.delta = std::ldexp(1.0, 1 - static_cast<int>(n));
  out.params.M = schedule.M(n);
  out.params.k = schedule.k(n);

  std::map<Label, std::uint32_t> black_ids, white_ids;
  for (const auto& pair : law.pairs) {
    black_ids.emplace(pair.black, 0);
    white_ids.emplace(pair.white, 0);
  }
  for (auto& [label, id] : black_ids) {
    id = static_cast<std::uint32_t>(out.black_labels.size());
    out.black_labels.push_back(label);
  }
  for (auto& [label, id] : white_ids) {
    id = static_cast<std::uint32_t>(out.white_labels.size());
    out.white_labels.push_back(label);
  }
  LabelJoining joining;
  joining.black_alphabet = out.black_labels.size();
  joining.white_alphabet = out.white_labels.size();
  joining.atoms.clear();
  for (std::size_t i = 0; i < law.pairs.size(); ++i) {
    joining.atoms.push_back({black_ids.at(law.pairs[i].black), white_ids.at(law.pairs[i].white), law.probability[i]});
  }
  out.params.joining = std::move(joining);
  out.params.validate();
  return out;
}

std::int64_t reconstruction_margin(const StageSchedule& schedule, unsigned n) {
  if (n < 1) throw DomainError("reconstruction_margin: n must be at least 1");
  return static_cast<std::int64_t>(schedule.R(n - 1)) * ((std::int64_t{1} << (n - 1)) - 1);
}

std::int64_t orbit_span(const StageSchedule& schedule, unsigned n) {
  return 2 * reconstruction_margin(schedule, n) + static_cast<std::int64_t>(schedule.M(n) + schedule.k(n) - 1);
}

std::vector<std::int64_t> black_gather_offsets(const Label& black) {
  std::vector<std::int64_t> out{0};
  std::int64_t acc = 0;
  for (auto it = black.rbegin(); it != black.rend(); ++it) {
    acc += *it;
    out.push_back(acc);
  }
  return out;
}

std::vector<std::int64_t> white_gather_offsets(const Label& white) {
  std::vector<std::int64_t> out{0};
  std::int64_t acc = 0;
  for (auto r : white) {
    acc += r;
    out.push_back(-acc);
  }
  return out;
}

CountWindow reconstruct_xi_n(const LabeledSiteCounts& labeled, const StageLemmaParams& stage, SiteWindow window) {
  std::int64_t reach_right = 0, reach_left = 0;
  std::vector<std::vector<std::int64_t>> black_offsets, white_offsets;
  for (const auto& h : stage.black_labels) {
    black_offsets.push_back(black_gather_offsets(h));
    reach_right = std::max(reach_right, black_offsets.back().back());
  }
  for (const auto& h : stage.white_labels) {
    white_offsets.push_back(white_gather_offsets(h));
    reach_left = std::max(reach_left, -white_offsets.back().back());
  }
  const auto& lw = labeled.window();
  if (lw.first > window.first - reach_left || lw.last < window.last + reach_right) {
    throw DomainError("reconstruct_xi_n: labelled window does not cover the reconstruction margin");
  }

  CountWindow out;
  out.first = window.first;
  out.stage = stage.stage;
  out.values.assign(static_cast<std::size_t>(window.size()), 0);
  // Scatter form of the gather sums: a particle at x with offsets d counts at
  // every time t = x - d inside the window.
  for (auto x = lw.first; x <= lw.last; ++x) {
    for (const auto& e : labeled.black_at(x)) {
      for (auto d : black_offsets.at(e.label)) {
        const auto t = x - d;
        if (window.contains(t)) out.values[static_cast<std::size_t>(t - window.first)] += e.count;
      }
    }
    for (const auto& e : labeled.white_at(x)) {
      for (auto d : white_offsets.at(e.label)) {
        const auto t = x - d;
        if (window.contains(t)) out.values[static_cast<std::size_t>(t - window.first)] += e.count;
      }
    }
  }
  return out;
}

CountWindow sample_xi0(SiteWindow window, std::uint64_t seed) {
  Rng rng(seed);
  std::poisson_distribution<std::uint32_t> poisson(1.0);
  CountWindow out;
  out.first = window.first;
  out.stage = 0;
  out.linked = false;
  out.seed = seed;
  out.values.resize(static_cast<std::size_t>(window.size()));
  for (auto& v : out.values) v = poisson(rng);
  return out;
}

CountWindow sample_xi_n(const StageLemmaParams& stage, const StageSchedule& schedule, SiteWindow window,
                        std::uint64_t seed, bool linked) {
  const auto margin = reconstruction_margin(schedule, stage.stage);
  const SiteWindow extended{window.first - margin, window.last + margin};
  const auto labeled =
      linked ? sample_zeta(stage.params, extended, seed, false) : sample_xi(stage.params, extended, seed);
  auto out = reconstruct_xi_n(labeled, stage, window);
  out.linked = linked;
  out.seed = seed;
  out.schedule_hash = schedule.hash();
  return out;
}

CountWindow sample_xi_n(const Construction& construction, unsigned n, SiteWindow window, std::uint64_t seed,
                        bool linked) {
  return sample_xi_n(stage_lemma_params(construction, n), construction.schedule(), window, seed, linked);
}

unsigned xi_infinity_stage(const StageSchedule& schedule, std::int64_t L) {
  for (unsigned n = 1; n < schedule.size(); ++n) {
    if (static_cast<std::int64_t>(schedule.M(n + 1)) > L) return n;
  }
  throw BudgetError("xi_infinity: schedule has no stage n with M_{n+1} > " + std::to_string(L));
}

XiInfinitySample sample_xi_infinity(const Construction& construction, std::int64_t L, std::uint64_t seed,
                                    std::int64_t length) {
  if (L < 1) throw DomainError("sample_xi_infinity: L must be positive");
  const unsigned n = xi_infinity_stage(construction.schedule(), L);
  if (n > construction.built_stages() + 1) {
    throw BudgetError("xi_infinity: stage " + std::to_string(n) + " needs stages below it to be built");
  }
  const auto len = std::max(L, length);
  XiInfinitySample out;
  out.stage = n;
  out.window = sample_xi_n(construction, n, {0, len - 1}, seed, true);
  return out;
}

std::vector<std::uint32_t> spaced_sites(const CountWindow& w, std::size_t stride) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < w.values.size(); i += stride) out.push_back(w.values[i]);
  return out;
}

std::vector<std::uint64_t> spaced_blocks(const CountWindow& w, std::size_t L, std::size_t stride,
                                         std::uint64_t base) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i + L <= w.values.size(); i += stride) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < L; ++j) key = key * base + std::min<std::uint64_t>(w.values[i + j], base - 1);
    out.push_back(key);
  }
  return out;
}

}  // namespace ptower
