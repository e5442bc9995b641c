#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pricing_lab/environments.hpp"
#include "pricing_lab/harness.hpp"

namespace pricing_lab {

/// Invalid configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  std::string name;
  std::int64_t horizon = 0;  // "T"
  int d = 2;
  double sigma = 0.5;
  double c_beta = 0.3;
  int trials = 2;
  std::uint64_t base_seed = 0;
  ContextKind context_kind = ContextKind::kStochasticGaussian;
  DemandKind demand_kind = DemandKind::kGlm;
  std::vector<PolicyKind> policies;
  std::optional<Expansion> expansion;
  std::string output_dir = "runs";

  // Policy settings.
  std::optional<double> ons_gamma;
  std::optional<double> ons_epsilon;
  double init_norm = 0.5;
  int mle_restarts = 8;

  // Ground-truth seed; defaults to base_seed.
  std::optional<std::uint64_t> env_seed;
  // Materialized environment; generated from env_seed when absent.
  std::optional<Eigen::VectorXd> theta_star;
  std::optional<Eigen::VectorXd> eta_star;
  std::optional<Eigen::VectorXd> mu_x;
  std::optional<Eigen::MatrixXd> cov_x;

  bool operator==(const ExperimentConfig& other) const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError with the line of the offending key.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Pretty-printed JSON; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Environment described by the config; materialized fields take precedence.
EnvSpec materialize_env(const ExperimentConfig& config);

/// Copy of the config with theta_star, eta_star, mu_x and cov_x filled in.
ExperimentConfig with_materialized(const ExperimentConfig& config, const EnvSpec& spec);

TrialOptions trial_options(const ExperimentConfig& config);

}  // namespace pricing_lab
