// Counts of Poisson-suspension particles in A at integer times, for the
// approximating transformations T^(n) and for the limit T.
//
// At stage n the particles whose orbits visit A come in pairs of half-orbits:
// a black half climbing rungs 1..2^{n-1} (ending in A_n) and a white half
// climbing rungs 2^{n-1}+1..2^n (starting in S A_n). Under T^(n-1) the halves
// are independent; under T^(n) they are linked by the stage-n return time.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ptower/construction.hpp"
#include "ptower/lemma.hpp"

namespace ptower {

struct CountWindow {
  std::int64_t first = 0;
  std::vector<std::uint32_t> values;

  // Provenance, echoed in the CSV header.
  unsigned stage = 0;
  bool linked = true;
  std::string schedule_hash;
  std::uint64_t seed = 0;

  std::int64_t last() const { return first + static_cast<std::int64_t>(values.size()) - 1; }
  std::uint32_t at(std::int64_t x) const { return values.at(static_cast<std::size_t>(x - first)); }
  std::string to_csv() const;
};

/// Lemma parameters of stage n together with the label sequences behind
/// the integer label ids used by the samplers.
struct StageLemmaParams {
  unsigned stage = 0;
  LemmaParams params;
  std::vector<Label> black_labels;
  std::vector<Label> white_labels;
};

/// Sample size of the label law when exact enumeration exceeds the piece budget.
inline constexpr std::size_t kSampledLabelLawSize = std::size_t{1} << 20;

/// delta = 2^{1-n}, M = M_n, k = k_n, joining = label law of stage n: exact
/// when its cells fit the piece budget, otherwise kSampledLabelLawSize uniform
/// points of A_n with a seed fixed by the schedule hash and n.
/// Needs the construction built through stage n-1.
StageLemmaParams stage_lemma_params(const Construction& construction, unsigned n);
StageLemmaParams stage_lemma_params(const Construction& construction, unsigned n, const LabelLaw& law);

/// R_{n-1} (2^{n-1} - 1): how far a half-orbit reaches from its A_n / S A_n visit.
std::int64_t reconstruction_margin(const StageSchedule& schedule, unsigned n);

/// Bound on the time spanned by a single orbit of T^(n) through A.
std::int64_t orbit_span(const StageSchedule& schedule, unsigned n);

/// Gather offsets d with: a black labelled h at site t + d is in A at time t.
/// The first step back from A_n uses the last entry of h^B.
std::vector<std::int64_t> black_gather_offsets(const Label& black);
/// Gather offsets d with: a white labelled h at site t + d is in A at time t.
std::vector<std::int64_t> white_gather_offsets(const Label& white);

/// xi_t = sum over labels of black(t + d, h) over black offsets d of h plus
/// white(t + d, h) over white offsets d of h, for t in `window`.
CountWindow reconstruct_xi_n(const LabeledSiteCounts& labeled, const StageLemmaParams& stage, SiteWindow window);

/// i.i.d. Poisson(1).
CountWindow sample_xi0(SiteWindow window, std::uint64_t seed);

/// xi^(n) when linked, the stage-n representation of xi^(n-1) otherwise.
CountWindow sample_xi_n(const Construction& construction, unsigned n, SiteWindow window, std::uint64_t seed,
                        bool linked);
CountWindow sample_xi_n(const StageLemmaParams& stage, const StageSchedule& schedule, SiteWindow window,
                        std::uint64_t seed, bool linked);

/// Smallest n with M_{n+1} > L; throws BudgetError when none is available.
unsigned xi_infinity_stage(const StageSchedule& schedule, std::int64_t L);

struct XiInfinitySample {
  CountWindow window;
  unsigned stage = 0;
};

/// xi^(infinity) on [0, L-1], realised through the stage from
/// xi_infinity_stage. With length > L the returned window is longer, and each
/// of its L-blocks has the law of xi^(infinity)|_0^{L-1}.
XiInfinitySample sample_xi_infinity(const Construction& construction, std::int64_t L, std::uint64_t seed,
                                    std::int64_t length = 0);

/// Values at first, first + stride, ... (count of them).
std::vector<std::uint32_t> spaced_sites(const CountWindow& w, std::size_t stride);
/// Non-overlapping L-blocks starting every `stride` sites, encoded in base `base`
/// after saturating at base - 1.
std::vector<std::uint64_t> spaced_blocks(const CountWindow& w, std::size_t L, std::size_t stride, std::uint64_t base);

}  // namespace ptower
