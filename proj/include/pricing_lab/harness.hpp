#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pricing_lab/environments.hpp"
#include "pricing_lab/likelihood.hpp"
#include "pricing_lab/link_math.hpp"
#include "pricing_lab/ons.hpp"

namespace pricing_lab {

enum class PolicyKind {
  kPwp,
  kRmlp2Modified,
  kRmlp2Homoscedastic,
  kRmlp2Valuation,
  kOracle,
  kConstant,
};

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);

struct PolicySettings {
  double c_beta = 0.3;
  /// Overrides the default ONS step parameter; epsilon then follows
  /// 1/(gamma^2 D^2) unless set explicitly.
  std::optional<double> ons_gamma;
  std::optional<double> ons_epsilon;
  /// Norm of each block of the initial hypothesis (all-ones direction).
  double init_norm = 0.5;
  int mle_restarts = 8;
};

struct TrialOptions {
  PolicySettings policy;
  bool trace = false;         // ONS per-round records and surrogate-regret tracking
  bool store_rounds = false;  // keep cumulative regret for every round
};

struct TrialDiagnostics {
  std::size_t price_clamps = 0;
  std::size_t projection_nonconvergences = 0;
  std::size_t refits = 0;
  std::size_t line_search_stalls = 0;
};

struct OnsTraceRow {
  std::int64_t step = 0;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  double projection_residual = 0.0;
  double nll_gap = 0.0;  // cumulative sum of l_t(current) - l_t(truth)
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::vector<std::int64_t> checkpoints;
  std::vector<double> cum_regret;
  ParamPair final_params;
  TrialDiagnostics diagnostics;
  std::vector<double> per_round;    // only with store_rounds
  std::vector<OnsTraceRow> trace;   // only with trace, PwP only
  double max_nll_gap = 0.0;         // only with trace, well-specified PwP only
};

/// 64 log-spaced rounds from 16 to T (deduplicated), plus T.
std::vector<std::int64_t> checkpoint_grid(std::int64_t horizon);

/// Plays one policy against the environment for T rounds; regret is the
/// analytic expected regret of each posted price.
TrialResult run_trial(const EnvSpec& spec, PolicyKind kind, std::int64_t horizon,
                      std::uint64_t seed, const TrialOptions& options = {});

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;  // in log2 units
  std::size_t points = 0;
};

/// OLS of log2(value) on log2(round) over rounds >= T/64, T = last round.
SlopeFit loglog_slope(const std::vector<std::int64_t>& rounds, const std::vector<double>& values);

struct WaldBand {
  std::vector<double> mean;
  std::vector<double> half_width;
};

/// Per-column mean and 1.96 * sd / sqrt(n); samples[trial][checkpoint].
WaldBand wald_band(const std::vector<std::vector<double>>& samples);

struct RegretCurve {
  std::vector<std::int64_t> checkpoints;
  std::vector<double> mean;
  std::vector<double> half_width;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  std::size_t trials = 0;
};

RegretCurve summarize(const std::vector<TrialResult>& trials);

struct PolicyOutcome {
  PolicyKind kind;
  RegretCurve curve;
  std::vector<TrialResult> trials;
};

struct ExperimentResult {
  std::vector<PolicyOutcome> outcomes;  // in the order requested
  const PolicyOutcome& at(PolicyKind kind) const;
};

/// Raw per-trial results of an experiment. A failed trial stops the
/// remaining work; trials that never ran or failed are empty.
struct ExperimentBatch {
  std::vector<PolicyKind> policies;
  std::vector<std::vector<std::optional<TrialResult>>> trials;  // [policy][trial]
  std::exception_ptr failure;
};

ExperimentBatch run_batch(const EnvSpec& spec, const std::vector<PolicyKind>& policies,
                          std::int64_t horizon, int trials, std::uint64_t base_seed,
                          const TrialOptions& options = {}, int jobs = 1);

/// Runs `trials` seeds (base_seed + i) for every policy. Policies share the
/// context and demand-noise streams of each seed. jobs > 1 runs trials on
/// worker threads; results are folded in trial order.
ExperimentResult run_experiment(const EnvSpec& spec, const std::vector<PolicyKind>& policies,
                                std::int64_t horizon, int trials, std::uint64_t base_seed,
                                const TrialOptions& options = {}, int jobs = 1);

}  // namespace pricing_lab
