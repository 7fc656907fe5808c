// Named, reproducible experiments driven by flat key-value config files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptower/config.hpp"
#include "ptower/construction.hpp"

namespace ptower {

inline constexpr const char* kToolVersion = "ptower 0.1.0";

struct ExperimentInfo {
  std::string name;
  std::string description;
  // Experiment keys with their defaults; schedule keys (M.n, k.n) among
  // them form the default schedule.
  std::vector<std::pair<std::string, std::string>> defaults;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo& experiment_info(const std::string& name);

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  StageSchedule schedule;
  std::string schedule_source;  // "default", "inline" or the schedule file path
  KeyValues params;             // every experiment key, defaults filled in

  /// `experiment` and `seed` are mandatory; keys the experiment does not
  /// know are rejected. A `schedule = <file>` path is resolved against
  /// base_dir.
  static ExperimentConfig parse(std::string_view text, const std::filesystem::path& base_dir = ".");
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct Statistic {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;         // sample size behind the value
  double dispersion = 0.0;   // standard error unless dispersion_kind says otherwise
  std::string dispersion_kind = "std_error";
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CsvRow {
  std::string replicate_id;
  std::string statistic;
  double value = 0.0;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<Statistic> statistics;
  std::vector<Assertion> assertions;
  std::vector<CsvRow> rows;
  std::vector<std::string> notes;

  void stat(std::string name, double value, std::size_t n, double dispersion,
            std::string kind = "std_error");
  void check(std::string name, bool passed, std::string detail);
  void row(std::string replicate_id, std::string statistic, double value);

  bool passed() const;
  std::vector<std::string> failures() const;
  const Statistic& statistic(const std::string& name) const;

  std::string summary_json() const;
  /// `replicate_id,statistic,value` with RFC 4180 quoting.
  std::string csv() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Runs the experiment and writes summary.json and results.csv into out_dir.
/// Returns 0 iff every assertion passed.
int run_to_directory(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Shortest round-trip decimal form.
std::string format_number(double x);

}  // namespace ptower
