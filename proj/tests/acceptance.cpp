// Acceptance suite: one [PASS]/[FAIL] line per criterion, exit status 0 iff
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "ptower/construction.hpp"
#include "ptower/dbar.hpp"
#include "ptower/entropy.hpp"
#include "ptower/experiments.hpp"
#include "ptower/lemma.hpp"
#include "ptower/rng.hpp"
#include "ptower/stats.hpp"
#include "ptower/suspension.hpp"

using namespace ptower;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << x;
  return out.str();
}

// 1 ----------------------------------------------------------------------------
Outcome closed_forms() {
  Outcome out;
  const double delta = 2.0;
  const std::uint64_t M = 5, replicates = 100'000;
  for (auto [J, k] : {std::pair<std::uint64_t, std::uint64_t>{3, 100}, {5, 1000}}) {
    LemmaParams params{delta, M, k, LabelJoining::singleton()};
    std::vector<double> none_free(replicates), S(replicates);
    for_each_enriched_past(params, static_cast<std::int64_t>(M + k), replicates,
                           seed_split(kSeed, {"AC1", std::to_string(k)}), [&](std::size_t r, const FreeCounts& fc) {
                             bool zero = true;
                             for (std::size_t j = 0; j < J; ++j) zero = zero && fc.F[j] == 0;
                             none_free[r] = zero;
                             double s = 0.0;
                             for (std::size_t j = 0; j < fc.F.size(); ++j) s += fc.F[j] / static_cast<double>(j + 1);
                             S[r] = s;
                           });
    const double p_hat = stats::moments(none_free).mean;
    const double p = std::exp(-delta * static_cast<double>(J * (J + 1)) / (4.0 * static_cast<double>(k)));
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(replicates));
    out.require(stats::within_sigma(p_hat, p, sigma),
                "J=" + std::to_string(J) + ",k=" + std::to_string(k) + " P(no free) " + fmt(p_hat, 6) + " vs " +
                    fmt(p, 6) + " (" + fmt(std::abs(p_hat - p) / sigma, 2) + " sigma)");
    const auto m = stats::moments(S);
    const double var = delta / (2.0 * static_cast<double>(k)) * harmonic_number(k);
    out.require(stats::within_sigma(m.variance, var, m.variance_std_error),
                "var S " + fmt(m.variance, 6) + " vs " + fmt(var, 6) + " (" +
                    fmt(std::abs(m.variance - var) / m.variance_std_error, 2) + " sigma)");
  }
  return out;
}

// 2 ----------------------------------------------------------------------------
Outcome free_particle_law() {
  Outcome out;
  const double delta = 2.0;
  const std::uint64_t M = 5, k = 200, replicates = 100'000;
  const std::vector<std::uint64_t> js{1, k / 2, k};
  LemmaParams params{delta, M, k, LabelJoining::singleton()};
  std::vector<std::vector<std::uint32_t>> F(js.size(), std::vector<std::uint32_t>(replicates));
  for_each_enriched_past(params, static_cast<std::int64_t>(M + k), replicates, seed_split(kSeed, {"AC2"}),
                         [&](std::size_t r, const FreeCounts& fc) {
                           for (std::size_t i = 0; i < js.size(); ++i) F[i][r] = fc.F[js[i] - 1];
                         });
  for (std::size_t i = 0; i < js.size(); ++i) {
    const double lambda = delta * static_cast<double>(js[i]) / (2.0 * static_cast<double>(k));
    const auto gof = stats::poisson_gof(F[i], lambda);
    out.require(gof.passes(0.01), "j=" + std::to_string(js[i]) + " p=" + fmt(gof.p_value, 3));
  }
  return out;
}

// 3 ----------------------------------------------------------------------------
Outcome poisson_marginals() {
  Outcome out;
  const std::size_t sites = 100'000;
  const Construction construction(StageSchedule::standard(4, 4), 2);
  for (unsigned n = 0; n <= 2; ++n) {
    // Sites further apart than one orbit are independent.
    const std::size_t stride = n == 0 ? 1 : static_cast<std::size_t>(orbit_span(construction.schedule(), n)) + 1;
    const SiteWindow window{0, static_cast<std::int64_t>(sites * stride) - 1};
    const auto seed = seed_split(kSeed, {"AC3", std::to_string(n)});
    const auto w = n == 0 ? sample_xi0(window, seed) : sample_xi_n(construction, n, window, seed, true);
    const auto values = spaced_sites(w, stride);
    const auto gof = stats::poisson_gof(values, 1.0);
    out.require(gof.passes(0.01) && values.size() >= sites, "xi(" + std::to_string(n) + ") " +
                                                               std::to_string(values.size()) + " sites p=" +
                                                               fmt(gof.p_value, 3));
  }
  return out;
}

// 4 ----------------------------------------------------------------------------
// Kantorovich-Rubinstein dual: L * dbar_L = max sum f (P - Q) over integer
// f : blocks -> {0..L} with |f(x) - f(y)| <= Hamming count; enumerated.
double kr_dual(const BlockCodec& codec, const std::vector<double>& diff) {
  const std::size_t n = diff.size();
  const std::uint32_t top = static_cast<std::uint32_t>(codec.length());
  std::vector<std::vector<unsigned>> dist(n, std::vector<unsigned>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) dist[a][b] = codec.distance(a, b);
  std::vector<std::uint32_t> f(n, 0);
  double best = -1.0;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == n) {
      double v = 0.0;
      for (std::size_t a = 0; a < n; ++a) v += f[a] * diff[a];
      best = std::max(best, v);
      return;
    }
    for (std::uint32_t v = 0; v <= top; ++v) {
      bool ok = true;
      for (std::size_t a = 0; a < i && ok; ++a) ok = (v > f[a] ? v - f[a] : f[a] - v) <= dist[a][i];
      if (!ok) continue;
      f[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
  return best / static_cast<double>(codec.length());
}

Outcome exact_solver() {
  Outcome out;
  Rng rng(seed_split(kSeed, {"AC4"}));
  double worst = 0.0, worst_marginal = 0.0;
  for (int c = 0; c < 100; ++c) {
    const std::uint64_t alphabet = 2 + rng() % 2;
    const std::size_t L = 1 + rng() % 2;
    const BlockCodec codec(L, alphabet);
    const std::size_t space = static_cast<std::size_t>(std::pow(alphabet, L));
    auto random_law = [&] {
      std::vector<std::pair<std::uint64_t, double>> entries;
      double total = 0.0;
      std::vector<double> w(space);
      for (auto& x : w) {
        x = rng() % 3 == 0 ? 0.0 : uniform01(rng);
        total += x;
      }
      if (total == 0.0) w[0] = total = 1.0;
      for (std::size_t i = 0; i < space; ++i) entries.emplace_back(i, w[i] / total);
      return BlockDistribution::from_masses(L, alphabet, entries);
    };
    const auto P = random_law(), Q = random_law();
    std::vector<double> diff(space, 0.0);
    for (std::size_t i = 0; i < P.keys.size(); ++i) diff[P.keys[i]] += P.mass[i];
    for (std::size_t i = 0; i < Q.keys.size(); ++i) diff[Q.keys[i]] -= Q.mass[i];
    const auto result = dbar_L_exact(P, Q);
    worst = std::max(worst, std::abs(result.value - kr_dual(codec, diff)));
    worst = std::max(worst, std::abs(result.plan.cost() - result.value));
    worst_marginal = std::max(worst_marginal, result.plan.marginal_error(P, Q));
  }
  out.require(worst <= 1e-9, "largest deviation from enumeration " + fmt(worst, 3));
  out.require(worst_marginal <= 1e-9, "largest marginal error " + fmt(worst_marginal, 3));
  return out;
}

// 5 ----------------------------------------------------------------------------
Outcome stage_trend() {
  Outcome out;
  const auto config = ExperimentConfig::parse(
      "experiment = stage-dbar\nseed = " + std::to_string(kSeed) +
      "\nstage = 1\nk.sweep = 2,8,32,128\nL = 8\nell = 6\nblocks = 100000\ntarget.k = 128\ntarget.max = 0.1\n"
      "criterion.k = 2000\nbound.max = 0.3\nconsistency = false\nM.1 = 4\nk.1 = 128\n");
  const auto result = run_experiment(config);
  for (const auto& a : result.assertions) out.require(a.passed, a.name + " [" + a.detail + "]");
  return out;
}

// 6 ----------------------------------------------------------------------------
Outcome entropy_chain() {
  Outcome out;
  const Construction construction(StageSchedule({{4, 128}}), 1);
  const auto big = sample_xi0({0, 999'999}, seed_split(kSeed, {"AC6", "marginal"}));
  const double h1 = block_entropy(big, 1, 8).hL;
  const double analytic = poisson_entropy(1.0, 8);
  out.require(std::abs(h1 - analytic) <= 0.02, "h1(xi0) " + fmt(h1, 6) + " vs " + fmt(analytic, 6));
  for (int run = 0; run < 3; ++run) {
    const SiteWindow W{0, 100'002};
    const auto x0 = sample_xi0(W, seed_split(kSeed, {"AC6", "xi0", std::to_string(run)}));
    const auto x1 = sample_xi_n(construction, 1, W, seed_split(kSeed, {"AC6", "xi1", std::to_string(run)}), true);
    const double h0 = block_entropy(x0, 4, 6).hL;
    const double h = block_entropy(x1, 4, 6).hL;
    const double d = dbar_L_empirical(x0, x1, 4, 6).value;
    const double gap = entropy_gap_bound(d, 7);
    out.require(h >= h0 - gap, "run " + std::to_string(run) + ": h(xi1) " + fmt(h, 5) + " >= " + fmt(h0, 5) + " - " +
                                   fmt(gap, 3) + " (dbar4 " + fmt(d, 3) + ")");
  }
  return out;
}

// 7 ----------------------------------------------------------------------------
Outcome krengel_zero() {
  Outcome out;
  const DyadicPoint origin(0, 0);
  for (std::size_t L : {8, 16}) {
    const double h = induced_coding_entropy(OrbitCoding::rung(4), std::size_t{1} << 18, L, origin).hL;
    const double exact = 4.0 * std::log(2.0) / static_cast<double>(L);
    out.require(std::abs(h - exact) <= 1e-12, "rung(4) L=" + std::to_string(L) + " " + fmt(h, 12));
  }
  const Construction construction(StageSchedule::standard(3, 4), 3);
  const auto symbols = code_orbit(OrbitCoding::return_time(3), origin, (std::size_t{1} << 20) + 15, &construction);
  const double h1 = block_entropy(std::span(symbols).first(std::size_t{1} << 20), 1).hL;
  const double h16 = block_entropy(symbols, 16).hL;
  out.require(h16 <= 0.5 * h1, "return-time H16/16 " + fmt(h16) + " vs H1 " + fmt(h1));
  return out;
}

// 8 ----------------------------------------------------------------------------
Outcome lecam() {
  Outcome out;
  Rng rng(seed_split(kSeed, {"AC8"}));
  std::size_t violations = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + rng() % 200;
    const double scale = 0.5 * uniform01(rng);
    std::vector<double> p(n);
    for (auto& q : p) q = scale * uniform01(rng);
    const auto g = lecam_gap(p);
    double sum_sq = 0.0;
    for (double q : p) sum_sq += q * q;
    if (g.exact_l1 > 2.0 * sum_sq) ++violations;
  }
  out.require(violations == 0, std::to_string(violations) + " violations in 1000 cases");
  const auto g = lecam_gap(std::vector<double>(100, 0.01));
  out.require(g.exact_l1 <= 0.02, "100 x Bernoulli(0.01): exact L1 " + fmt(g.exact_l1, 5));
  return out;
}

// 9 ----------------------------------------------------------------------------
Outcome window_coincidence() {
  Outcome out;
  const auto schedule = StageSchedule::standard(4, 4);  // M_3 = 10
  const Construction construction(schedule, 3);
  const std::size_t L = 8, blocks = 100'000;
  const std::size_t stride = static_cast<std::size_t>(orbit_span(schedule, 3)) + L + 1;
  const SiteWindow window{0, static_cast<std::int64_t>(blocks * stride) - 1};
  const auto x2 = sample_xi_n(construction, 2, window, seed_split(kSeed, {"AC9", "xi2"}), true);
  const auto x3 = sample_xi_n(construction, 3, window, seed_split(kSeed, {"AC9", "xi3"}), true);
  for (std::uint64_t base : {2, 3}) {
    const auto a = spaced_blocks(x2, L, stride, base);
    const auto b = spaced_blocks(x3, L, stride, base);
    const auto test = stats::two_sample_chi_square(a, b);
    out.require(test.passes(0.01), "base " + std::to_string(base) + ": " + std::to_string(test.bins) + " bins, p=" +
                                       fmt(test.p_value, 3));
  }
  return out;
}

// 10 ---------------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome out;
  const auto root = std::filesystem::temp_directory_path() / ("ptower-acceptance-" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::string>> configs{
      {"lemma-simple", "replicates = 2000\nJ = 3\nk = 100\ngof.replicates = 2000\ncriterion.k = 200\n"
                       "criterion.replicates = 100\n"},
      {"lemma-general", "window = 20000\nstage = 2\n"},
      {"stage-dbar", "k.sweep = 2,8\ntarget.k = 8\nL = 4\nblocks = 20000\nnoise.replicates = 2\ncriterion.k = 100\n"
                     "criterion.replicates = 100\n"},
      {"entropy-growth", "L = 1,2\nblocks = 20000\nmarginal.window = 20000\n"},
      {"krengel-zero", "return.blocks = 65536\nrung.blocks = 65536\n"},
      {"poisson-approx", "cases = 200\n"}};
  for (const auto& [name, extra] : configs) {
    const auto text = "experiment = " + name + "\nseed = 99\n" + extra;
    std::vector<std::string> outputs;
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / (name + "-" + std::to_string(rep));
      run_to_directory(ExperimentConfig::parse(text), dir);
      outputs.push_back(slurp(dir / "summary.json") + slurp(dir / "results.csv"));
    }
    out.require(outputs[0] == outputs[1] && !outputs[0].empty(), name);
  }
  std::filesystem::remove_all(root);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    Outcome (*run)();
    double time_limit;  // seconds, 0 = none
  };
  const Criterion criteria[] = {
      {"AC1", "closed forms vs Monte Carlo", closed_forms, 60},
      {"AC2", "free-particle law", free_particle_law, 0},
      {"AC3", "Poisson marginal of xi(n), n = 0,1,2", poisson_marginals, 0},
      {"AC4", "exact d-bar solver vs enumeration", exact_solver, 60},
      {"AC5", "d-bar trend in k and 3 eps bound", stage_trend, 600},
      {"AC6", "entropy chain", entropy_chain, 0},
      {"AC7", "Krengel-zero evidence", krengel_zero, 0},
      {"AC8", "Le Cam guarantee", lecam, 0},
      {"AC9", "window coincidence of xi(2) and xi(3)", window_coincidence, 0},
      {"AC10", "determinism of experiment outputs", determinism, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0) o.require(seconds < c.time_limit, "runtime under " + fmt(c.time_limit, 3) + " s");
    std::printf("[%s] %s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), seconds);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
