#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptower/experiments.hpp"

namespace {

void write_error(const std::filesystem::path& out_dir, const std::string& experiment, const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  nlohmann::ordered_json j;
  j["tool"] = ptower::kToolVersion;
  j["experiment"] = experiment;
  j["error"] = message;
  j["failures"] = {"error: " + message};
  j["passed"] = false;
  std::ofstream(out_dir / "summary.json", std::ios::binary) << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification runner for the Poisson suspension tower construction"};
  app.set_version_flag("--version", ptower::kToolVersion);
  bool list = false;
  app.add_flag("--list", list, "List the available experiments");

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  std::string config_path, out_dir;
  run->add_option("--config", config_path, "Experiment config (key = value lines)")->required();
  run->add_option("--out", out_dir, "Directory for summary.json and results.csv")->required();

  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& info : ptower::experiment_catalog()) {
      std::cout << info.name << "\n  " << info.description << "\n";
      for (const auto& [key, value] : info.defaults) std::cout << "    " << key << " = " << value << "\n";
    }
    return 0;
  }
  if (!*run) {
    std::cerr << app.help();
    return 2;
  }

  std::string experiment;
  try {
    const auto config = ptower::ExperimentConfig::load(config_path);
    experiment = config.experiment;
    const int code = ptower::run_to_directory(config, out_dir);
    std::cout << experiment << ": " << (code == 0 ? "all assertions passed" : "assertions failed") << " ("
              << out_dir << "/summary.json)\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    write_error(out_dir, experiment, e.what());
    return 2;
  }
}
