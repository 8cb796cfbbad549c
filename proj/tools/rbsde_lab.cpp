#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "rbsde_lab/experiment.hpp"

namespace fs = std::filesystem;

namespace {

unsigned thread_fallback() {
  if (const char* env = std::getenv("RBSDE_LAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring RBSDE_LAB_THREADS='" << env << "'\n";
  }
  return 1;
}

void print_diagnostics(const rbsde_lab::ConfigError& e) {
  for (const auto& d : e.diagnostics())
    std::cerr << "error: " << (d.field.empty() ? "(config)" : d.field) << ": " << d.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice solvers and verifiers for second-order reflected BSDEs"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Directory for report.json and data files");
  run->add_option("--threads", threads, "Worker threads (default: RBSDE_LAB_THREADS or 1)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config without running solvers");
  validate->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const fs::path base = fs::path(config).parent_path();
  try {
    const rbsde_lab::Json cfg = rbsde_lab::load_config(config);
    if (*validate) {
      const auto diags = rbsde_lab::validate_config(cfg, base);
      if (!diags.empty()) {
        print_diagnostics(rbsde_lab::ConfigError(diags));
        return 1;
      }
      std::cout << "config ok: " << cfg.value("experiment", "") << "\n";
      return 0;
    }
    const unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : thread_fallback();
    const auto result = rbsde_lab::run_experiment(cfg, out_dir, workers, base);
    if (out_dir.empty()) std::cout << result.report.dump(2) << "\n";
    for (const auto& v : result.report["verdicts"])
      std::cerr << v["name"].get<std::string>() << ": " << v["result"].get<std::string>() << "\n";
    return result.exit_code;
  } catch (const rbsde_lab::ConfigError& e) {
    print_diagnostics(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
