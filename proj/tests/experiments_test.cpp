#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ptower/errors.hpp"
#include "ptower/experiments.hpp"

using namespace ptower;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ptower_experiments_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSmallPoisson = "experiment = poisson-approx\nseed = 7\ncases = 50\nn.max = 40\n";

}  // namespace

TEST(Catalog, SixExperiments) {
  const auto& catalog = experiment_catalog();
  ASSERT_EQ(catalog.size(), 6u);
  std::set<std::string> names;
  for (const auto& info : catalog) names.insert(info.name);
  EXPECT_EQ(names, (std::set<std::string>{"lemma-simple", "lemma-general", "stage-dbar", "entropy-growth",
                                          "krengel-zero", "poisson-approx"}));
  EXPECT_THROW(experiment_info("nope"), FormatError);
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(ExperimentConfig::parse("seed = 1\n"), FormatError);
  EXPECT_THROW(ExperimentConfig::parse("experiment = poisson-approx\n"), FormatError);
  EXPECT_THROW(ExperimentConfig::parse("experiment = poisson-approx\nseed = 1\nbogus = 2\n"), FormatError);
  EXPECT_THROW(ExperimentConfig::parse("experiment = nope\nseed = 1\n"), FormatError);
  EXPECT_THROW(ExperimentConfig::parse("experiment = lemma-general\nseed = 1\nschedule = s.txt\nM.1 = 2\nk.1 = 4\n"),
               FormatError);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/config.txt"), FormatError);
}

TEST(Config, ScheduleSources) {
  const auto by_default = ExperimentConfig::parse("experiment = lemma-general\nseed = 1\n");
  EXPECT_EQ(by_default.schedule_source, "default");
  EXPECT_EQ(by_default.schedule.size(), 3u);

  const auto inline_cfg = ExperimentConfig::parse("experiment = lemma-general\nseed = 1\nM.1 = 3\nk.1 = 2\n");
  EXPECT_EQ(inline_cfg.schedule_source, "inline");
  EXPECT_EQ(inline_cfg.schedule.M(1), 3u);

  const auto dir = scratch("schedule");
  std::ofstream(dir / "sched.txt") << "M.1 = 4\nk.1 = 5\nM.2 = 9\nk.2 = 5\n";
  std::ofstream(dir / "run.cfg") << "experiment = lemma-general\nseed = 1\nschedule = sched.txt\n";
  const auto from_file = ExperimentConfig::load(dir / "run.cfg");
  EXPECT_EQ(from_file.schedule_source, "sched.txt");
  EXPECT_EQ(from_file.schedule.M(2), 9u);

  const auto none = ExperimentConfig::parse(kSmallPoisson);
  EXPECT_EQ(none.schedule_source, "none");
  EXPECT_EQ(*none.params.get_uint("cases"), 50u);
  EXPECT_EQ(*none.params.get_double("fixed.max"), 0.02);
}

TEST(Run, DeterministicOutputs) {
  const auto cfg = ExperimentConfig::parse(kSmallPoisson);
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  EXPECT_EQ(run_to_directory(cfg, a), 0);
  EXPECT_EQ(run_to_directory(cfg, b), 0);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));

  const auto other = ExperimentConfig::parse("experiment = poisson-approx\nseed = 8\ncases = 50\nn.max = 40\n");
  EXPECT_EQ(run_to_directory(other, c), 0);
  EXPECT_NE(slurp(a / "results.csv"), slurp(c / "results.csv"));

  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(summary["tool"], kToolVersion);
  EXPECT_EQ(summary["experiment"], "poisson-approx");
  EXPECT_TRUE(summary["passed"].get<bool>());
  EXPECT_TRUE(summary["failures"].empty());
  EXPECT_EQ(slurp(a / "results.csv").rfind("replicate_id,statistic,value\r\n", 0), 0u);
}

TEST(Run, FailingAssertionIsReported) {
  const auto cfg = ExperimentConfig::parse("experiment = poisson-approx\nseed = 7\ncases = 10\nfixed.max = 1e-9\n");
  const auto dir = scratch("fail");
  EXPECT_EQ(run_to_directory(cfg, dir), 1);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_FALSE(summary["passed"].get<bool>());
  ASSERT_EQ(summary["failures"].size(), 1u);
}

TEST(Result, CsvQuotingAndLookup) {
  ExperimentResult r;
  r.row("a,b", "say \"hi\"", 0.5);
  r.row("plain", "x", 2);
  EXPECT_EQ(r.csv(), "replicate_id,statistic,value\r\n\"a,b\",\"say \"\"hi\"\"\",0.5\r\nplain,x,2\r\n");
  r.stat("s", 1.25, 4, 0.1);
  EXPECT_DOUBLE_EQ(r.statistic("s").value, 1.25);
  r.check("ok", true, "");
  EXPECT_TRUE(r.passed());
  r.check("bad", false, "detail");
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.failures().size(), 1u);
}

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}
