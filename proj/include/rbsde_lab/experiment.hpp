#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rbsde_lab {

using Json = nlohmann::ordered_json;

/// One schema or cross-field problem, located by JSON pointer (and line for parse errors).
struct Diagnostic {
  std::string field;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diags);
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

inline constexpr const char* kExperimentKinds[] = {
    "solve-rbsde",     "solve-2rbsde",  "solve-2drbsde",  "verify-minimality", "verify-skorokhod",
    "counterexample",  "price-american", "check-obstacle", "convergence-sweep"};

/// Reads and parses a config file; throws ConfigError with the parser's line and column.
Json load_config(const std::filesystem::path& path);

/// Every schema and cross-field violation, in document order. Never runs a solver.
std::vector<Diagnostic> validate_config(const Json& config, const std::filesystem::path& base_dir = {});

struct RunResult {
  Json report;
  int exit_code = 0;  // 0 all verdicts pass, 2 some verdict fails
};

/**
 * Runs the configured experiment. With a non-empty out_dir, writes report.json
 * and the data files named in the report. Throws ConfigError on invalid input.
 */
RunResult run_experiment(const Json& config, const std::filesystem::path& out_dir = {}, unsigned threads = 1,
                         const std::filesystem::path& base_dir = {});

/// Report with the wall-time entry removed: the part that must be reproducible.
Json report_body(const Json& report);

/// Shortest round-trip-safe text is not used for CSV; fields use 17 significant digits.
std::string format_double(double v);

}  // namespace rbsde_lab
