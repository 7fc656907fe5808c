#include "ptower/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "ptower/dbar.hpp"
#include "ptower/entropy.hpp"
#include "ptower/errors.hpp"
#include "ptower/lemma.hpp"
#include "ptower/rng.hpp"
#include "ptower/stats.hpp"
#include "ptower/suspension.hpp"

namespace ptower {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

namespace {

using Defaults = std::vector<std::pair<std::string, std::string>>;

std::vector<ExperimentInfo> make_catalog() {
  std::vector<ExperimentInfo> out;
  out.push_back({"lemma-simple",
                 "Free particles of the connected process: no-free probability and parameter-sum variance against "
                 "closed forms, Poisson law of F_j, conditional-law criterion",
                 Defaults{{"delta", "2"},
                          {"M", "5"},
                          {"J", "3,5"},
                          {"k", "100,1000"},
                          {"replicates", "100000"},
                          {"sigma", "3"},
                          {"alpha", "0.01"},
                          {"gof.k", "200"},
                          {"gof.j", "1,100,200"},
                          {"gof.replicates", "100000"},
                          {"criterion.k", "1000"},
                          {"criterion.replicates", "1000"},
                          {"criterion.epsilon", "auto"}}});
  out.push_back({"lemma-general",
                 "Labelled connected and disconnected processes of one stage: per-label Poisson goodness of fit, "
                 "link label frequencies and link lengths",
                 Defaults{{"stage", "3"}, {"window", "200000"}, {"alpha", "0.01"}, {"M.1", "2"}, {"k.1", "4"},
                          {"M.2", "6"}, {"k.2", "4"}, {"M.3", "10"}, {"k.3", "4"}}});
  out.push_back({"stage-dbar",
                 "d-bar_L between consecutive stage processes over a sweep of k_n, with a replicated self-distance "
                 "noise floor and the 3 eps conditional bound",
                 Defaults{{"stage", "1"},
                          {"k.sweep", "2,8,32,128"},
                          {"L", "8"},
                          {"ell", "6"},
                          {"blocks", "100000"},
                          {"block_floor", "10000"},
                          {"noise.replicates", "3"},
                          {"target.k", "128"},
                          {"target.max", "0.1"},
                          {"criterion.k", "2000"},
                          {"criterion.replicates", "2000"},
                          {"criterion.epsilon", "auto"},
                          {"bound.max", "0.3"},
                          {"consistency", "true"},
                          {"M.1", "4"},
                          {"k.1", "128"}}});
  out.push_back({"entropy-growth",
                 "Block entropies of xi(0), the stage processes and xi(infinity), against the d-bar continuity bound",
                 Defaults{{"L", "1,2,4"},
                          {"ell", "6"},
                          {"blocks", "100000"},
                          {"block_floor", "10000"},
                          {"marginal.ell", "8"},
                          {"marginal.window", "1000000"},
                          {"marginal.tolerance", "0.02"},
                          {"correction", "none"},
                          {"M.1", "4"},
                          {"k.1", "128"},
                          {"M.2", "136"},
                          {"k.2", "128"}}});
  out.push_back({"krengel-zero",
                 "Block entropy of odometer orbits coded by rungs and by return times",
                 Defaults{{"rung.m", "4"},
                          {"rung.L", "8,16"},
                          {"rung.blocks", "262144"},
                          {"return.depth", "3"},
                          {"return.L", "1,2,4,8,16"},
                          {"return.blocks", "1048576"},
                          {"return.ratio_max", "0.5"},
                          {"starts", "0,1/4"},
                          {"start.tolerance", "0.01"},
                          {"M.1", "2"},
                          {"k.1", "4"},
                          {"M.2", "6"},
                          {"k.2", "4"},
                          {"M.3", "10"},
                          {"k.3", "4"}}});
  out.push_back({"poisson-approx",
                 "Exact L1 distance between Bernoulli sums and Poisson against the bound 2 sum p_i^2",
                 Defaults{{"cases", "1000"}, {"n.max", "200"}, {"p.max", "0.5"}, {"fixed.n", "100"},
                          {"fixed.p", "0.01"}, {"fixed.max", "0.02"}}});
  return out;
}

bool is_schedule_key(const std::string& key) {
  return (key.size() > 2 && (key[0] == 'M' || key[0] == 'k') && key[1] == '.' &&
          std::all_of(key.begin() + 2, key.end(), [](char c) { return c >= '0' && c <= '9'; })) ||
         key.rfind("asymptotic.", 0) == 0;
}

// Typed access to experiment keys; every key is present after defaults.
class Params {
 public:
  explicit Params(const KeyValues& kv) : kv_(kv) {}

  std::uint64_t positive(const std::string& key) const {
    const auto v = *kv_.get_uint(key);
    if (v == 0) throw FormatError("key `" + key + "` must be positive");
    return v;
  }
  double real(const std::string& key) const { return *kv_.get_double(key); }
  double positive_real(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) throw FormatError("key `" + key + "` must be positive");
    return v;
  }
  std::vector<std::uint64_t> positive_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    const auto values = *kv_.get_int_list(key);
    for (auto v : values) {
      if (v <= 0) throw FormatError("key `" + key + "` needs positive entries");
      out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
  }
  std::string text(const std::string& key) const { return *kv_.get_string(key); }
  bool flag(const std::string& key) const {
    const auto s = text(key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw FormatError("key `" + key + "` must be true or false");
  }
  /// "auto" or a number in (0, 1].
  std::optional<double> auto_or_real(const std::string& key) const {
    const auto s = text(key);
    if (s == "auto") return std::nullopt;
    const double v = real(key);
    if (!(v > 0.0 && v <= 1.0)) throw FormatError("key `" + key + "` must be auto or lie in (0,1]");
    return v;
  }

 private:
  const KeyValues& kv_;
};

std::string num(double x) { return format_number(x); }

std::string label_text(const Label& label) {
  std::string out = "(";
  for (std::size_t i = 0; i < label.size(); ++i) out += (i ? " " : "") + std::to_string(label[i]);
  return out + ")";
}

double binomial_se(double p, std::size_t n) { return n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0; }

void record_moments(ExperimentResult& r, const std::string& name, const stats::Moments& m) {
  r.stat(name + ".mean", m.mean, m.n, m.std_error());
  r.stat(name + ".variance", m.variance, m.n, m.variance_std_error);
}

struct CriterionOutcome {
  double epsilon = 0.0;
  double bad_mass = 0.0;
  double max_l1_good = 0.0;
  ConditionalBound bound;
};

CriterionOutcome evaluate_criterion(const std::vector<double>& l1, std::optional<double> target) {
  CriterionOutcome out;
  out.epsilon = target ? *target : common_epsilon(l1);
  std::size_t bad = 0;
  for (double v : l1) {
    if (v >= out.epsilon) ++bad;
    else out.max_l1_good = std::max(out.max_l1_good, v);
  }
  out.bad_mass = l1.empty() ? 0.0 : static_cast<double>(bad) / static_cast<double>(l1.size());
  out.bound = dbar_upper_conditional(std::max(out.bad_mass, target ? *target : out.epsilon), out.max_l1_good);
  return out;
}

void run_criterion(ExperimentResult& r, const std::string& prefix, const LemmaParams& params, std::size_t replicates,
                   std::optional<double> target, std::uint64_t seed) {
  const auto est =
      conditional_criterion_estimate(params, static_cast<std::int64_t>(params.M + params.k), 1.0, replicates, seed);
  const auto outcome = evaluate_criterion(est.l1, target);
  r.stat(prefix + ".l1.mean", stats::moments(est.l1).mean, replicates, stats::moments(est.l1).std_error());
  r.stat(prefix + ".epsilon", outcome.epsilon, replicates, 0.0, target ? "fixed" : "data-driven");
  r.stat(prefix + ".bad_mass", outcome.bad_mass, replicates, binomial_se(outcome.bad_mass, replicates));
  r.stat(prefix + ".max_l1_good", outcome.max_l1_good, replicates, 0.0, "extreme");
  r.stat(prefix + ".bound", outcome.bound.bound, replicates, 3.0 * binomial_se(outcome.bad_mass, replicates),
         "3x bad_mass std_error");
  r.notes.push_back(prefix + ": conditioning on the enriched past (free blacks by site); " + outcome.bound.caveat);
  for (std::size_t i = 0; i < est.l1.size(); ++i) r.row(std::to_string(i), prefix + ".l1", est.l1[i]);
}

// ---------------------------------------------------------------------------

void lemma_simple(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const double delta = p.positive_real("delta");
  const auto M = p.positive("M");
  const auto Js = p.positive_list("J");
  const auto ks = p.positive_list("k");
  if (Js.size() != ks.size()) throw FormatError("keys `J` and `k` must list the same number of cases");
  const auto replicates = p.positive("replicates");
  const double z = p.positive_real("sigma");
  const double alpha = p.positive_real("alpha");

  for (std::size_t i = 0; i < Js.size(); ++i) {
    const auto J = Js[i], k = ks[i];
    if (J > k) throw FormatError("lemma-simple: J must not exceed k");
    const std::string id = "J=" + std::to_string(J) + ",k=" + std::to_string(k);
    LemmaParams params{delta, M, k, LabelJoining::singleton()};
    std::vector<double> none_free(replicates), S(replicates);
    for_each_enriched_past(params, static_cast<std::int64_t>(M + k), replicates,
                           seed_split(c.seed, {"lemma-simple", "closed-form", id}),
                           [&](std::size_t rep, const FreeCounts& fc) {
                             bool zero = true;
                             for (std::size_t j = 0; j < J; ++j) zero = zero && fc.F[j] == 0;
                             none_free[rep] = zero ? 1.0 : 0.0;
                             double s = 0.0;
                             for (std::size_t j = 0; j < fc.F.size(); ++j) s += fc.F[j] / static_cast<double>(j + 1);
                             S[rep] = s;
                           });
    const double p_emp = stats::moments(none_free).mean;
    const double p_th = no_free_probability(J, k, delta);
    const double sigma = binomial_se(p_th, replicates);
    r.stat("no_free[" + id + "].empirical", p_emp, replicates, binomial_se(p_emp, replicates));
    r.stat("no_free[" + id + "].closed_form", p_th, 0, 0.0, "exact");
    r.check("no_free[" + id + "] within " + num(z) + " sigma", stats::within_sigma(p_emp, p_th, sigma, z),
            "empirical " + num(p_emp) + ", closed form " + num(p_th) + ", sigma " + num(sigma));

    const auto m = stats::moments(S);
    const auto th = param_sum_stats(k, delta);
    record_moments(r, "param_sum[" + id + "]", m);
    r.stat("param_sum[" + id + "].closed_form.mean", th.mean, 0, 0.0, "exact");
    r.stat("param_sum[" + id + "].closed_form.variance", th.variance, 0, 0.0, "exact");
    r.check("param_sum[" + id + "].variance within " + num(z) + " sigma",
            stats::within_sigma(m.variance, th.variance, m.variance_std_error, z),
            "empirical " + num(m.variance) + ", closed form " + num(th.variance) + ", sigma " +
                num(m.variance_std_error));
    r.check("param_sum[" + id + "].mean within " + num(z) + " sigma",
            stats::within_sigma(m.mean, th.mean, m.std_error(), z),
            "empirical " + num(m.mean) + ", closed form " + num(th.mean) + ", sigma " + num(m.std_error()));
    r.row(id, "no_free.empirical", p_emp);
    r.row(id, "no_free.closed_form", p_th);
    r.row(id, "param_sum.variance", m.variance);
    r.row(id, "param_sum.closed_form.variance", th.variance);
  }

  // Law of F_j.
  const auto gk = p.positive("gof.k");
  const auto js = p.positive_list("gof.j");
  const auto greps = p.positive("gof.replicates");
  for (auto j : js) {
    if (j > gk) throw FormatError("lemma-simple: gof.j entries must not exceed gof.k");
  }
  LemmaParams gparams{delta, M, gk, LabelJoining::singleton()};
  std::vector<std::vector<std::uint32_t>> F(js.size(), std::vector<std::uint32_t>(greps));
  for_each_enriched_past(gparams, static_cast<std::int64_t>(M + gk), greps,
                         seed_split(c.seed, {"lemma-simple", "free-law"}), [&](std::size_t rep, const FreeCounts& fc) {
                           for (std::size_t i = 0; i < js.size(); ++i) F[i][rep] = fc.F[js[i] - 1];
                         });
  for (std::size_t i = 0; i < js.size(); ++i) {
    const std::string id = "j=" + std::to_string(js[i]) + ",k=" + std::to_string(gk);
    const double lambda = delta * static_cast<double>(js[i]) / (2.0 * static_cast<double>(gk));
    const auto gof = stats::poisson_gof(F[i], lambda);
    const auto m = stats::moments(F[i]);
    r.stat("free_law[" + id + "].mean", m.mean, m.n, m.std_error());
    r.stat("free_law[" + id + "].chi_square", gof.statistic, greps, static_cast<double>(gof.dof), "dof");
    r.stat("free_law[" + id + "].p_value", gof.p_value, greps, 0.0, "none");
    r.check("free_law[" + id + "] Poisson(" + num(lambda) + ") at level " + num(alpha), gof.passes(alpha),
            "chi-square " + num(gof.statistic) + " on " + std::to_string(gof.dof) + " dof, p = " + num(gof.p_value));
    r.row(id, "free_law.mean", m.mean);
    r.row(id, "free_law.p_value", gof.p_value);
  }

  const auto ck = p.positive("criterion.k");
  run_criterion(r, "criterion[k=" + std::to_string(ck) + "]", LemmaParams{delta, M, ck, LabelJoining::singleton()},
                p.positive("criterion.replicates"), p.auto_or_real("criterion.epsilon"),
                seed_split(c.seed, {"lemma-simple", "criterion"}));
}

// ---------------------------------------------------------------------------

void lemma_general(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const auto stage = static_cast<unsigned>(p.positive("stage"));
  const auto window = p.positive("window");
  const double alpha = p.positive_real("alpha");
  if (stage > c.schedule.size()) throw FormatError("lemma-general: schedule has fewer stages than `stage`");

  const Construction construction(c.schedule, stage);
  const auto sp = stage_lemma_params(construction, stage);
  const auto& params = sp.params;
  const SiteWindow W{0, static_cast<std::int64_t>(window) - 1};
  const auto xi = sample_xi(params, W, seed_split(c.seed, {"lemma-general", "xi"}));
  const auto zeta = sample_zeta(params, W, seed_split(c.seed, {"lemma-general", "zeta"}), true);

  const auto pb = params.joining.black_marginal();
  const auto pw = params.joining.white_marginal();
  const std::size_t tests = 2 * (pb.size() + pw.size() + 1) + 2;
  const double level = alpha / static_cast<double>(tests);
  r.stat("labels.black", static_cast<double>(pb.size()), 0, 0.0, "exact");
  r.stat("labels.white", static_cast<double>(pw.size()), 0, 0.0, "exact");
  r.stat("labels.pairs", static_cast<double>(params.joining.atoms.size()), 0, 0.0, "exact");
  r.notes.push_back("per-test level " + num(level) + " = alpha / " + std::to_string(tests) + " (Bonferroni)");

  auto gof_check = [&](const std::string& id, const std::vector<std::uint32_t>& counts, double lambda) {
    const auto gof = stats::poisson_gof(counts, lambda);
    const auto m = stats::moments(counts);
    r.stat(id + ".mean", m.mean, m.n, m.std_error());
    r.stat(id + ".p_value", gof.p_value, m.n, 0.0, "none");
    r.check(id + " Poisson(" + num(lambda) + ")", gof.passes(level),
            "chi-square " + num(gof.statistic) + " on " + std::to_string(gof.dof) + " dof, p = " + num(gof.p_value));
    r.row(id, "mean", m.mean);
    r.row(id, "p_value", gof.p_value);
  };

  for (const auto* sample : {&xi, &zeta}) {
    const std::string process = sample == &xi ? "xi" : "zeta";
    std::vector<std::uint32_t> totals(static_cast<std::size_t>(window));
    for (std::size_t a = 0; a < pb.size(); ++a) {
      std::vector<std::uint32_t> counts(static_cast<std::size_t>(window));
      for (std::int64_t x = W.first; x <= W.last; ++x) {
        counts[static_cast<std::size_t>(x)] = sample->black(x, static_cast<std::uint32_t>(a));
        totals[static_cast<std::size_t>(x)] += counts[static_cast<std::size_t>(x)];
      }
      gof_check(process + ".black" + label_text(sp.black_labels[a]), counts, pb[a] * params.delta / 2.0);
    }
    for (std::size_t b = 0; b < pw.size(); ++b) {
      std::vector<std::uint32_t> counts(static_cast<std::size_t>(window));
      for (std::int64_t x = W.first; x <= W.last; ++x) {
        counts[static_cast<std::size_t>(x)] = sample->white(x, static_cast<std::uint32_t>(b));
        totals[static_cast<std::size_t>(x)] += counts[static_cast<std::size_t>(x)];
      }
      gof_check(process + ".white" + label_text(sp.white_labels[b]), counts, pw[b] * params.delta / 2.0);
    }
    gof_check(process + ".total", totals, params.delta);
  }

  // Links: label pairs follow the joining, lengths are uniform.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> atom_of;
  for (std::size_t i = 0; i < params.joining.atoms.size(); ++i) {
    atom_of[{params.joining.atoms[i].black, params.joining.atoms[i].white}] = i;
  }
  std::vector<double> pair_counts(params.joining.atoms.size(), 0.0), length_counts(params.k, 0.0);
  std::size_t links = 0;
  for (const auto& l : zeta.links()) {
    if (!W.contains(l.black_site)) continue;
    ++links;
    pair_counts[atom_of.at({l.black_label, l.white_label})] += 1.0;
    length_counts[static_cast<std::size_t>(l.white_site - l.black_site) - params.M] += 1.0;
  }
  std::vector<double> pair_expected, length_expected(params.k, static_cast<double>(links) / static_cast<double>(params.k));
  for (const auto& a : params.joining.atoms) pair_expected.push_back(a.probability * static_cast<double>(links));
  const auto pair_gof = stats::chi_square_gof(pair_counts, pair_expected);
  const auto length_gof = stats::chi_square_gof(length_counts, length_expected);
  r.stat("links", static_cast<double>(links), links, std::sqrt(static_cast<double>(links)), "poisson_sd");
  r.stat("links.pairs.p_value", pair_gof.p_value, links, 0.0, "none");
  r.stat("links.length.p_value", length_gof.p_value, links, 0.0, "none");
  r.check("link label pairs follow the joining", pair_gof.passes(level),
          "chi-square " + num(pair_gof.statistic) + " on " + std::to_string(pair_gof.dof) + " dof, p = " +
              num(pair_gof.p_value));
  r.check("link lengths uniform on {M..M+k-1}", length_gof.passes(level),
          "chi-square " + num(length_gof.statistic) + " on " + std::to_string(length_gof.dof) + " dof, p = " +
              num(length_gof.p_value));
}

// ---------------------------------------------------------------------------

StageSchedule with_stage_k(const StageSchedule& s, unsigned n, std::uint64_t k) {
  std::vector<StageParams> stages;
  for (unsigned i = 1; i <= n; ++i) stages.push_back(s.at(i));
  stages.back().k = k;
  return StageSchedule(std::move(stages));
}

// xi^(n-1) on `window`: i.i.d. Poisson(1) for n = 1, otherwise the unlinked
// stage-n representation.
CountWindow previous_stage(const Construction& construction, unsigned n, SiteWindow window, std::uint64_t seed) {
  if (n == 1) return sample_xi0(window, seed);
  return sample_xi_n(construction, n, window, seed, false);
}

void stage_dbar(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const auto n = static_cast<unsigned>(p.positive("stage"));
  if (n > c.schedule.size()) throw FormatError("stage-dbar: schedule has fewer stages than `stage`");
  const auto ks = p.positive_list("k.sweep");
  const auto L = p.positive("L");
  const auto ell = static_cast<std::uint32_t>(p.positive("ell"));
  const auto blocks = p.positive("blocks");
  const auto floor = p.positive("block_floor");
  const auto noise_reps = p.positive("noise.replicates");
  const auto target_k = p.positive("target.k");
  const double target_max = p.positive_real("target.max");
  const auto crit_k = p.positive("criterion.k");
  const auto crit_reps = p.positive("criterion.replicates");
  const auto crit_eps = p.auto_or_real("criterion.epsilon");
  const double bound_max = p.positive_real("bound.max");
  const bool consistency = p.flag("consistency");
  if (std::find(ks.begin(), ks.end(), target_k) == ks.end()) throw FormatError("stage-dbar: target.k not in k.sweep");

  const SiteWindow W{0, static_cast<std::int64_t>(blocks + L) - 2};
  const std::string tag = "L=" + std::to_string(L) + ",ell=" + std::to_string(ell);
  auto seed_for = [&](const std::string& what, std::uint64_t k) {
    return seed_split(c.seed, {"stage-dbar", what, std::to_string(k)});
  };

  const Construction base(c.schedule, n);
  std::vector<double> noise;
  for (std::uint64_t i = 0; i < noise_reps; ++i) {
    const auto a = previous_stage(base, n, W, seed_for("noise-a", i));
    const auto b = previous_stage(base, n, W, seed_for("noise-b", i));
    noise.push_back(dbar_L_empirical(a, b, L, ell, floor).value);
    r.row(std::to_string(i), "noise.dbar[" + tag + "]", noise.back());
  }
  const auto nm = stats::moments(noise);
  const double noise_sd = noise.size() > 1 ? std::sqrt(nm.variance) : 0.0;
  const double noise_floor = nm.mean + 3.0 * noise_sd;
  r.stat("noise.dbar[" + tag + "].mean", nm.mean, nm.n, nm.std_error());
  r.stat("noise.floor", noise_floor, nm.n, noise_sd, "replicate_sd");

  auto dbar_at = [&](std::uint64_t k) {
    const Construction con(with_stage_k(c.schedule, n, k), n);
    const auto a = previous_stage(con, n, W, seed_for("previous", k));
    const auto b = sample_xi_n(con, n, W, seed_for("current", k), true);
    return dbar_L_empirical(a, b, L, ell, floor);
  };

  std::vector<double> values;
  for (auto k : ks) {
    const auto d = dbar_at(k);
    values.push_back(d.value);
    const std::string id = "k=" + std::to_string(k);
    r.stat("dbar[" + tag + "," + id + "]", d.value, d.blocks_a, noise_sd, "noise_replicate_sd");
    r.row(id, "dbar[" + tag + "]", d.value);
    r.row(id, "support.previous", static_cast<double>(d.support_a));
    r.row(id, "support.current", static_cast<double>(d.support_b));
  }
  bool monotone = true;
  std::string detail;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (values[i + 1] > values[i] + noise_floor) monotone = false;
    detail += (i ? ", " : "") + num(values[i]);
  }
  detail += (values.size() > 1 ? ", " : "") + num(values.back()) + "; noise floor " + num(noise_floor);
  r.check("dbar nonincreasing in k within the noise floor", monotone, detail);
  const auto at_target = values[static_cast<std::size_t>(std::find(ks.begin(), ks.end(), target_k) - ks.begin())];
  r.check("dbar at k=" + std::to_string(target_k) + " below " + num(target_max), at_target < target_max,
          "dbar " + num(at_target));

  const std::string prefix = "criterion[k=" + std::to_string(crit_k) + "]";
  LemmaParams params{std::ldexp(1.0, 1 - static_cast<int>(n)), c.schedule.M(n), crit_k, LabelJoining::singleton()};
  run_criterion(r, prefix, params, crit_reps, crit_eps, seed_for("criterion", crit_k));
  const double bound = r.statistic(prefix + ".bound").value;
  r.check("3 eps bound at k=" + std::to_string(crit_k) + " below " + num(bound_max), bound < bound_max,
          "bound " + num(bound));
  if (consistency) {
    const auto d = dbar_at(crit_k);
    r.stat("dbar[" + tag + ",k=" + std::to_string(crit_k) + "]", d.value, d.blocks_a, noise_sd, "noise_replicate_sd");
    r.check("empirical dbar at k=" + std::to_string(crit_k) + " within bound + noise floor",
            d.value <= bound + noise_floor,
            "dbar " + num(d.value) + ", bound " + num(bound) + ", noise floor " + num(noise_floor));
  }
}

// ---------------------------------------------------------------------------

void entropy_growth(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const auto Ls = p.positive_list("L");
  const auto ell = static_cast<std::uint32_t>(p.positive("ell"));
  const auto blocks = p.positive("blocks");
  const auto floor = p.positive("block_floor");
  const auto mell = static_cast<std::uint32_t>(p.positive("marginal.ell"));
  const auto mwindow = p.positive("marginal.window");
  const double mtol = p.positive_real("marginal.tolerance");
  const auto correction = parse_correction(p.text("correction"));
  const std::uint64_t Lmax = *std::max_element(Ls.begin(), Ls.end());

  const auto big = sample_xi0({0, static_cast<std::int64_t>(mwindow) - 1}, seed_split(c.seed, {"entropy-growth", "marginal"}));
  const auto marginal = block_entropy(big, 1, mell, correction, floor);
  const double analytic = poisson_entropy(1.0, mell);
  r.stat("marginal.xi0.h1[ell=" + std::to_string(mell) + "]", marginal.hL, marginal.sample_blocks, 0.0, "none");
  r.stat("marginal.poisson_entropy[ell=" + std::to_string(mell) + "]", analytic, 0, 0.0, "exact");
  r.check("xi0 single-site entropy within " + num(mtol) + " of the Poisson(1) value",
          std::abs(marginal.hL - analytic) <= mtol, "plug-in " + num(marginal.hL) + ", series " + num(analytic));

  const unsigned stages = c.schedule.size();
  const Construction construction(c.schedule, stages);
  const SiteWindow W{0, static_cast<std::int64_t>(blocks + Lmax) - 2};
  std::vector<std::pair<std::string, CountWindow>> processes;
  processes.emplace_back("xi(0)", sample_xi0(W, seed_split(c.seed, {"entropy-growth", "xi", "0"})));
  for (unsigned n = 1; n <= stages; ++n) {
    processes.emplace_back("xi(" + std::to_string(n) + ")",
                           sample_xi_n(construction, n, W, seed_split(c.seed, {"entropy-growth", "xi", std::to_string(n)}), true));
  }
  for (auto L : Ls) {
    std::vector<std::pair<std::string, CountWindow>> row = processes;
    const auto inf = sample_xi_infinity(construction, static_cast<std::int64_t>(L),
                                        seed_split(c.seed, {"entropy-growth", "xi-infinity", std::to_string(L)}),
                                        static_cast<std::int64_t>(blocks + Lmax - 1));
    row.emplace_back("xi(inf)", inf.window);
    const std::string tag = "L=" + std::to_string(L) + ",ell=" + std::to_string(ell);
    const auto h0 = block_entropy(row.front().second, L, ell, correction, floor);
    r.stat("h[xi(0)," + tag + "]", h0.hL, h0.sample_blocks, 0.0, "none");
    r.row(tag, "h[xi(0)]", h0.hL);
    for (std::size_t i = 1; i < row.size(); ++i) {
      const auto& [name, window] = row[i];
      const auto h = block_entropy(window, L, ell, correction, floor);
      const auto d = dbar_L_empirical(row.front().second, window, L, ell, floor);
      const double gap = entropy_gap_bound(d.value, ell + 1);
      r.stat("h[" + name + "," + tag + "]", h.hL, h.sample_blocks, 0.0, "none");
      r.stat("dbar[xi(0)," + name + "," + tag + "]", d.value, d.blocks_a, 0.0, "none");
      r.row(tag, "h[" + name + "]", h.hL);
      r.row(tag, "dbar[xi(0)," + name + "]", d.value);
      r.row(tag, "gap_bound[" + name + "]", gap);
      r.check("h(" + name + ") >= h(xi(0)) - gap bound at " + tag, h.hL >= h0.hL - gap,
              "h " + num(h.hL) + ", h0 " + num(h0.hL) + ", dbar " + num(d.value) + ", bound " + num(gap));
    }
    if (L == Ls.front()) r.notes.push_back("xi(inf) blocks realised through stage " + std::to_string(inf.stage));
  }
}

// ---------------------------------------------------------------------------

std::vector<DyadicPoint> parse_starts(const std::string& text) {
  std::vector<DyadicPoint> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    try {
      Rational q(t);
      q.canonicalize();
      out.push_back(DyadicPoint::from_rational(q));
    } catch (const std::invalid_argument&) {
      throw FormatError("starts: cannot parse `" + t + "` as a rational");
    }
  }
  if (out.empty()) throw FormatError("starts: empty list");
  return out;
}

void krengel_zero(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const auto m = static_cast<unsigned>(p.positive("rung.m"));
  const auto rung_Ls = p.positive_list("rung.L");
  const auto rung_blocks = p.positive("rung.blocks");
  const auto depth = static_cast<unsigned>(p.positive("return.depth"));
  const auto rt_Ls = p.positive_list("return.L");
  const auto rt_blocks = p.positive("return.blocks");
  const double ratio_max = p.positive_real("return.ratio_max");
  const auto starts = parse_starts(p.text("starts"));
  const double tol = p.positive_real("start.tolerance");
  if (depth > c.schedule.size()) throw FormatError("krengel-zero: schedule has fewer stages than return.depth");
  r.notes.push_back("the induced map on A is the odometer and mu(A) = 1, so the Krengel entropy equals h(T_A)");

  const std::uint64_t rung_Lmax = *std::max_element(rung_Ls.begin(), rung_Ls.end());
  const auto rung_symbols = code_orbit(OrbitCoding::rung(m), starts.front(), rung_blocks + rung_Lmax - 1);
  for (auto L : rung_Ls) {
    const auto rep = block_entropy(std::span(rung_symbols).first(rung_blocks + L - 1), L);
    const double exact = static_cast<double>(m) * std::log(2.0) / static_cast<double>(L);
    const std::string id = "rung(" + std::to_string(m) + "),L=" + std::to_string(L);
    r.stat("hL[" + id + "]", rep.hL, rep.sample_blocks, 0.0, "none");
    r.row(id, "hL", rep.hL);
    r.check("hL[" + id + "] equals m ln2 / L", std::abs(rep.hL - exact) <= 1e-12,
            "hL " + num(rep.hL) + ", m ln2 / L " + num(exact));
  }

  const Construction construction(c.schedule, depth);
  const std::uint64_t rt_Lmax = *std::max_element(rt_Ls.begin(), rt_Ls.end());
  std::vector<std::vector<double>> hl(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const auto symbols = code_orbit(OrbitCoding::return_time(depth), starts[s], rt_blocks + rt_Lmax - 1, &construction);
    const std::string sid = "start=" + starts[s].to_string();
    for (auto L : rt_Ls) {
      const auto rep = block_entropy(std::span(symbols).first(rt_blocks + L - 1), L);
      hl[s].push_back(rep.hL);
      const std::string id = "return-time(" + std::to_string(depth) + "),L=" + std::to_string(L) + "," + sid;
      r.stat("hL[" + id + "]", rep.hL, rep.sample_blocks, 0.0, "none");
      r.row(id, "hL", rep.hL);
      r.row(id, "distinct_blocks", static_cast<double>(rep.distinct_blocks));
    }
    const double lz = lz78_entropy_rate(symbols);
    r.stat("lz78[return-time(" + std::to_string(depth) + ")," + sid + "]", lz, symbols.size(), 0.0, "none");
  }
  bool decreasing = true;
  std::string detail;
  for (std::size_t i = 0; i < rt_Ls.size(); ++i) {
    if (i + 1 < rt_Ls.size() && hl[0][i + 1] > hl[0][i]) decreasing = false;
    detail += (i ? ", " : "") + num(hl[0][i]);
  }
  r.check("return-time hL nonincreasing in L", decreasing, detail);
  const double ratio = hl[0].back() / hl[0].front();
  r.stat("return-time.ratio[L=" + std::to_string(rt_Ls.back()) + "/L=" + std::to_string(rt_Ls.front()) + "]", ratio,
         rt_blocks, 0.0, "none");
  r.check("hL at L=" + std::to_string(rt_Ls.back()) + " at most " + num(ratio_max) + " of hL at L=" +
              std::to_string(rt_Ls.front()),
          ratio <= ratio_max, "ratio " + num(ratio));
  for (std::size_t s = 1; s < starts.size(); ++s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rt_Ls.size(); ++i) worst = std::max(worst, std::abs(hl[s][i] - hl[0][i]));
    r.check("start " + starts[s].to_string() + " agrees with start " + starts[0].to_string(), worst <= tol,
            "largest hL difference " + num(worst));
  }
}

// ---------------------------------------------------------------------------

void poisson_approx(const ExperimentConfig& c, ExperimentResult& r) {
  const Params p(c.params);
  const auto cases = p.positive("cases");
  const auto nmax = p.positive("n.max");
  const double pmax = p.positive_real("p.max");
  const auto fixed_n = p.positive("fixed.n");
  const double fixed_p = p.positive_real("fixed.p");
  const double fixed_max = p.positive_real("fixed.max");
  if (pmax > 1.0 || fixed_p > 1.0) throw FormatError("poisson-approx: probabilities must not exceed 1");

  Rng rng(seed_split(c.seed, {"poisson-approx", "grid"}));
  std::uniform_int_distribution<std::uint64_t> size(1, nmax);
  std::size_t violations = 0;
  std::vector<double> slack;
  for (std::uint64_t i = 0; i < cases; ++i) {
    const auto n = size(rng);
    const double scale = pmax * uniform01(rng);
    std::vector<double> ps(n);
    for (auto& q : ps) q = scale * uniform01(rng);
    const auto gap = lecam_gap(ps);
    if (gap.exact_l1 > gap.bound) ++violations;
    slack.push_back(gap.bound - gap.exact_l1);
    const auto id = std::to_string(i);
    r.row(id, "n", static_cast<double>(n));
    r.row(id, "lambda", gap.lambda);
    r.row(id, "exact_l1", gap.exact_l1);
    r.row(id, "bound", gap.bound);
  }
  r.stat("grid.violations", static_cast<double>(violations), cases, 0.0, "count");
  r.stat("grid.min_slack", *std::min_element(slack.begin(), slack.end()), cases, 0.0, "extreme");
  r.check("exact L1 <= 2 sum p^2 on every grid case", violations == 0,
          std::to_string(violations) + " violations in " + std::to_string(cases) + " cases");

  const std::vector<double> ps(fixed_n, fixed_p);
  const auto gap = lecam_gap(ps);
  const std::string id = "n=" + std::to_string(fixed_n) + ",p=" + num(fixed_p);
  r.stat("fixed[" + id + "].exact_l1", gap.exact_l1, 0, 0.0, "exact");
  r.stat("fixed[" + id + "].bound", gap.bound, 0, 0.0, "exact");
  r.check("fixed[" + id + "] exact L1 <= " + num(fixed_max), gap.exact_l1 <= fixed_max,
          "exact L1 " + num(gap.exact_l1));
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog = make_catalog();
  return catalog;
}

const ExperimentInfo& experiment_info(const std::string& name) {
  for (const auto& info : experiment_catalog()) {
    if (info.name == name) return info;
  }
  throw FormatError("unknown experiment `" + name + "`");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  const auto kv = KeyValues::parse(text);
  ExperimentConfig cfg;
  const auto name = kv.get_string("experiment");
  if (!name) throw FormatError("config: `experiment` is required");
  cfg.experiment = *name;
  const auto seed = kv.get_uint("seed");
  if (!seed) throw FormatError("config: `seed` is required");
  cfg.seed = *seed;
  const auto& info = experiment_info(cfg.experiment);

  KeyValues schedule_defaults;
  for (const auto& [key, value] : info.defaults) {
    if (is_schedule_key(key)) {
      schedule_defaults.set(key, value);
    } else {
      cfg.params.set(key, value);
    }
  }
  bool inline_schedule = false;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "experiment" || key == "seed" || key == "schedule") continue;
    if (is_schedule_key(key)) {
      inline_schedule = true;
      continue;
    }
    if (!cfg.params.contains(key)) throw FormatError("config: unknown key `" + key + "` for " + cfg.experiment);
    cfg.params.set(key, value);
    kv.mark_consumed(key);
  }

  if (const auto path = kv.get_string("schedule")) {
    if (inline_schedule) throw FormatError("config: give either `schedule` or inline M.n/k.n keys, not both");
    const auto resolved = std::filesystem::path(*path).is_absolute() ? std::filesystem::path(*path) : base_dir / *path;
    cfg.schedule = StageSchedule::load(resolved.string());
    cfg.schedule_source = *path;
  } else if (inline_schedule) {
    cfg.schedule = StageSchedule::from_key_values(kv);
    cfg.schedule_source = "inline";
  } else if (!schedule_defaults.entries().empty()) {
    cfg.schedule = StageSchedule::from_key_values(schedule_defaults);
    cfg.schedule_source = "default";
  } else {
    cfg.schedule_source = "none";
  }
  if (auto extra = kv.unconsumed(); !extra.empty()) throw FormatError("config: unknown key `" + extra.front() + "`");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config `" + path.string() + "`");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void ExperimentResult::stat(std::string name, double value, std::size_t n, double dispersion, std::string kind) {
  statistics.push_back({std::move(name), value, n, dispersion, std::move(kind)});
}

void ExperimentResult::check(std::string name, bool ok, std::string detail) {
  assertions.push_back({std::move(name), ok, std::move(detail)});
}

void ExperimentResult::row(std::string replicate_id, std::string statistic_name, double value) {
  rows.push_back({std::move(replicate_id), std::move(statistic_name), value});
}

bool ExperimentResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

std::vector<std::string> ExperimentResult::failures() const {
  std::vector<std::string> out;
  for (const auto& a : assertions) {
    if (!a.passed) out.push_back(a.name);
  }
  return out;
}

const Statistic& ExperimentResult::statistic(const std::string& name) const {
  for (const auto& s : statistics) {
    if (s.name == name) return s;
  }
  throw DomainError("no statistic named `" + name + "`");
}

namespace {

nlohmann::ordered_json number_json(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string ExperimentResult::summary_json() const {
  nlohmann::ordered_json j;
  j["tool"] = kToolVersion;
  j["experiment"] = experiment;
  auto& in = j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  auto& st = j["statistics"] = nlohmann::ordered_json::array();
  for (const auto& s : statistics) {
    st.push_back({{"name", s.name},
                  {"value", number_json(s.value)},
                  {"n", s.n},
                  {"dispersion", number_json(s.dispersion)},
                  {"dispersion_kind", s.dispersion_kind}});
  }
  auto& as = j["assertions"] = nlohmann::ordered_json::array();
  for (const auto& a : assertions) as.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  j["failures"] = failures();
  j["notes"] = notes;
  j["passed"] = passed();
  return j.dump(2) + "\n";
}

std::string ExperimentResult::csv() const {
  std::string out = "replicate_id,statistic,value\r\n";
  for (const auto& r : rows) {
    out += csv_field(r.replicate_id) + "," + csv_field(r.statistic) + "," + format_number(r.value) + "\r\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult r;
  r.experiment = config.experiment;
  r.inputs.emplace_back("experiment", config.experiment);
  r.inputs.emplace_back("seed", std::to_string(config.seed));
  for (const auto& [k, v] : config.params.entries()) r.inputs.emplace_back(k, v);
  r.inputs.emplace_back("schedule.source", config.schedule_source);
  if (config.schedule.size() > 0) {
    r.inputs.emplace_back("schedule", config.schedule.to_text());
    r.inputs.emplace_back("schedule.hash", config.schedule.hash());
  }

  if (config.experiment == "lemma-simple") lemma_simple(config, r);
  else if (config.experiment == "lemma-general") lemma_general(config, r);
  else if (config.experiment == "stage-dbar") stage_dbar(config, r);
  else if (config.experiment == "entropy-growth") entropy_growth(config, r);
  else if (config.experiment == "krengel-zero") krengel_zero(config, r);
  else if (config.experiment == "poisson-approx") poisson_approx(config, r);
  else throw FormatError("unknown experiment `" + config.experiment + "`");
  return r;
}

int run_to_directory(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto result = run_experiment(config);
  std::ofstream(out_dir / "summary.json", std::ios::binary) << result.summary_json();
  std::ofstream(out_dir / "results.csv", std::ios::binary) << result.csv();
  return result.passed() ? 0 : 1;
}

}  // namespace ptower
