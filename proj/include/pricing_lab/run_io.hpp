#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pricing_lab/config.hpp"
#include "pricing_lab/harness.hpp"
#include "pricing_lab/link_math.hpp"
#include "pricing_lab/ons.hpp"

namespace pricing_lab {

/// Shortest round-trip decimal representation ("%.17g" fallback).
std::string format_real(double value);

/// Value of PRICING_LAB_SEED, if set. Throws ConfigError when it is not a
/// non-negative integer.
std::optional<std::uint64_t> seed_from_environment();

/// Derived constants and ONS hyperparameters as a JSON object.
std::string constants_json(const PricingConstants& constants, double sigma,
                           const OnsHyper& defaults, const std::optional<OnsHyper>& effective = {});

struct RunRequest {
  ExperimentConfig config;
  std::optional<std::filesystem::path> output_dir;  // overrides config.output_dir
  std::optional<std::uint64_t> seed_override;
  bool trace = false;
  int jobs = 1;
};

struct RunReport {
  std::filesystem::path directory;
  bool complete = false;
  std::string error;  // set when a trial failed
  std::vector<std::string> files;
};

/// Runs the experiment and writes a new run directory. Trial failures are
/// reported (complete = false) after partial results have been written.
RunReport execute_run(const RunRequest& request);

/// Creates `<base>/<name>-<UTC timestamp>`, suffixed -1, -2, ... if taken.
std::filesystem::path create_run_directory(const std::filesystem::path& base, const std::string& name);

/// The fixed CSV files of a finished experiment, keyed by file name.
struct RunFiles {
  std::vector<std::pair<std::string, std::string>> files;
};
RunFiles render_run_files(const ExperimentConfig& config, const ExperimentBatch& batch,
                          std::int64_t horizon, bool trace);

}  // namespace pricing_lab
