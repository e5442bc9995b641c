#include "pricing_lab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pricing_lab/policies.hpp"

namespace pricing_lab {
namespace {

constexpr int kGridPoints = 64;
constexpr std::int64_t kFirstCheckpoint = 16;

struct PolicyName {
  PolicyKind kind;
  const char* name;
};

constexpr PolicyName kPolicyNames[] = {
    {PolicyKind::kPwp, "pwp"},
    {PolicyKind::kRmlp2Modified, "rmlp2-modified"},
    {PolicyKind::kRmlp2Homoscedastic, "rmlp2-homoscedastic"},
    {PolicyKind::kRmlp2Valuation, "rmlp2-valuation"},
    {PolicyKind::kOracle, "oracle"},
    {PolicyKind::kConstant, "constant"},
};

// Constants for the environment dimension and, when the context is expanded,
// for the expanded model dimension used by PwP.
struct TrialSetup {
  LinkModel link;
  PricingConstants env_constants;
  PricingConstants model_constants;
};

TrialSetup make_setup(const EnvSpec& spec, std::int64_t horizon, const PolicySettings& settings) {
  const LinkModel link(spec.sigma);
  TrialSetup setup{link, derive_constants(link, settings.c_beta, spec.d, horizon), {}};
  if (spec.expansion) {
    const int m = static_cast<int>(spec.expansion->powers.size());
    setup.model_constants = derive_constants(link, settings.c_beta, spec.d * (m + 1), horizon);
  } else {
    setup.model_constants = setup.env_constants;
  }
  return setup;
}

OnsHyper ons_hyper(const PricingConstants& constants, const PolicySettings& settings) {
  OnsHyper hyper = settings.ons_gamma
                       ? hyperparameters_for_gamma(*settings.ons_gamma, constants.d_diam)
                       : default_hyperparameters(constants);
  if (settings.ons_epsilon) hyper.epsilon = *settings.ons_epsilon;
  return hyper;
}

std::unique_ptr<Policy> make_policy(const EnvSpec& spec, PolicyKind kind, const TrialSetup& setup,
                                    const PolicySettings& settings, std::uint64_t seed) {
  const int d = spec.d;
  switch (kind) {
    case PolicyKind::kPwp: {
      const PricingConstants& c = setup.model_constants;
      return std::make_unique<PwpPolicy>(setup.link, c, ons_hyper(c, settings),
                                         ParamPair::uniform_direction(c.d, settings.init_norm),
                                         seed);
    }
    case PolicyKind::kRmlp2Modified:
      return std::make_unique<Rmlp2Policy>(setup.link, setup.env_constants,
                                           Rmlp2Variant::kModifiedHeteroscedastic,
                                           ParamPair::uniform_direction(d, settings.init_norm),
                                           seed, settings.mle_restarts);
    case PolicyKind::kRmlp2Homoscedastic:
      return std::make_unique<Rmlp2Policy>(setup.link, setup.env_constants,
                                           Rmlp2Variant::kOriginalHomoscedastic,
                                           ParamPair::uniform_direction(d, settings.init_norm),
                                           seed, settings.mle_restarts);
    case PolicyKind::kRmlp2Valuation:
      return std::make_unique<Rmlp2Policy>(setup.link, setup.env_constants,
                                           Rmlp2Variant::kValuation,
                                           ParamPair::uniform_direction(d, settings.init_norm),
                                           seed, settings.mle_restarts);
    case PolicyKind::kOracle:
      return std::make_unique<OraclePolicy>(setup.link, spec);
    case PolicyKind::kConstant:
      return std::make_unique<ConstantPricePolicy>(setup.env_constants.c2, d);
  }
  throw std::invalid_argument("unknown policy kind");
}

TrialResult play(const EnvSpec& spec, PolicyKind kind, std::int64_t horizon, std::uint64_t seed,
                 const TrialOptions& options, const TrialSetup& setup) {
  const bool expand = kind == PolicyKind::kPwp && spec.expansion.has_value();
  std::unique_ptr<Policy> policy = make_policy(spec, kind, setup, options.policy, seed);
  auto* pwp = dynamic_cast<PwpPolicy*>(policy.get());
  const bool tracing = options.trace && pwp != nullptr;
  // The gap to the truth is only meaningful when the truth lies in the model.
  const bool track_gap =
      tracing && !expand && spec.demand_kind != DemandKind::kMisspecifiedValuation;
  const ParamPair truth_params(spec.theta_star, spec.eta_star);

  TrialResult result;
  result.seed = seed;
  result.checkpoints = checkpoint_grid(horizon);
  result.cum_regret.reserve(result.checkpoints.size());
  if (options.store_rounds) result.per_round.reserve(static_cast<std::size_t>(horizon));

  ContextStream contexts(spec, seed);
  Rng demand = make_stream(seed, stream::kDemand);
  double cum = 0.0;
  double gap = 0.0;
  std::size_t next_checkpoint = 0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    try {
      const Eigen::VectorXd x = contexts.next(t);
      Observation obs;
      obs.x = expand ? expand_context(x, spec.expansion->x0, spec.expansion->powers) : x;
      obs.p = policy->propose(obs.x);
      obs.bought = sample_demand(spec, x, obs.p, demand);
      const TrueIndex truth = true_index(spec, x);
      cum += instant_regret(setup.link, truth.u, truth.beta, obs.p);
      if (tracing) {
        if (track_gap) {
          gap += nll(setup.link, pwp->ons().params, obs) - nll(setup.link, truth_params, obs);
          result.max_nll_gap = std::max(result.max_nll_gap, gap);
        }
        OnsRoundInfo info;
        pwp->update(obs, &info);
        result.trace.push_back(
            {info.step, info.grad_norm, info.lambda_min, info.projection_residual, gap});
      } else {
        policy->observe(obs);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(to_string(kind) + " seed " + std::to_string(seed) + " round " +
                               std::to_string(t) + ": " + e.what());
    }
    if (options.store_rounds) result.per_round.push_back(cum);
    if (next_checkpoint < result.checkpoints.size() && result.checkpoints[next_checkpoint] == t) {
      result.cum_regret.push_back(cum);
      ++next_checkpoint;
    }
  }
  result.final_params = policy->estimate();
  const PolicyDiagnostics& diag = policy->diagnostics();
  result.diagnostics = {diag.price_clamps, diag.projection_nonconvergences, diag.refits,
                        diag.line_search_stalls};
  return result;
}

}  // namespace

std::string to_string(PolicyKind kind) {
  for (const PolicyName& p : kPolicyNames) {
    if (p.kind == kind) return p.name;
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string& name) {
  for (const PolicyName& p : kPolicyNames) {
    if (name == p.name) return p.kind;
  }
  throw std::invalid_argument("unknown policy '" + name + "'");
}

std::vector<std::int64_t> checkpoint_grid(std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("checkpoint_grid: horizon must be positive");
  std::vector<std::int64_t> grid;
  if (horizon > kFirstCheckpoint) {
    const double lo = std::log(static_cast<double>(kFirstCheckpoint));
    const double hi = std::log(static_cast<double>(horizon));
    for (int i = 0; i < kGridPoints; ++i) {
      const double v = std::exp(lo + (hi - lo) * i / (kGridPoints - 1));
      const auto t = std::clamp<std::int64_t>(std::llround(v), kFirstCheckpoint, horizon);
      if (grid.empty() || grid.back() < t) grid.push_back(t);
    }
  }
  if (grid.empty() || grid.back() != horizon) grid.push_back(horizon);
  return grid;
}

TrialResult run_trial(const EnvSpec& spec, PolicyKind kind, std::int64_t horizon,
                      std::uint64_t seed, const TrialOptions& options) {
  return play(spec, kind, horizon, seed, options, make_setup(spec, horizon, options.policy));
}

SlopeFit loglog_slope(const std::vector<std::int64_t>& rounds, const std::vector<double>& values) {
  if (rounds.size() != values.size() || rounds.empty()) {
    throw std::invalid_argument("loglog_slope: rounds and values must be non-empty and aligned");
  }
  const double start = static_cast<double>(rounds.back()) / 64.0;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (static_cast<double>(rounds[i]) < start) continue;
    if (!(values[i] > 0.0)) {
      throw std::domain_error("loglog_slope: values must be positive on the fit window");
    }
    xs.push_back(std::log2(static_cast<double>(rounds[i])));
    ys.push_back(std::log2(values[i]));
  }
  const std::size_t n = xs.size();
  if (n < 3) throw std::invalid_argument("loglog_slope: fewer than 3 points in the fit window");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    ssr += r * r;
  }
  fit.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return fit;
}

WaldBand wald_band(const std::vector<std::vector<double>>& samples) {
  WaldBand band;
  if (samples.empty()) return band;
  const std::size_t n = samples.size();
  const std::size_t cols = samples.front().size();
  band.mean.assign(cols, 0.0);
  band.half_width.assign(cols, 0.0);
  for (const auto& row : samples) {
    if (row.size() != cols) throw std::invalid_argument("wald_band: ragged sample matrix");
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (const auto& row : samples) mean += row[j];
    mean /= static_cast<double>(n);
    band.mean[j] = mean;
    if (n < 2) continue;
    double ss = 0.0;
    for (const auto& row : samples) ss += (row[j] - mean) * (row[j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    band.half_width[j] = 1.96 * sd / std::sqrt(static_cast<double>(n));
  }
  return band;
}

RegretCurve summarize(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw std::invalid_argument("summarize: no trials");
  RegretCurve curve;
  curve.checkpoints = trials.front().checkpoints;
  curve.trials = trials.size();
  std::vector<std::vector<double>> samples;
  samples.reserve(trials.size());
  for (const TrialResult& t : trials) {
    if (t.checkpoints != curve.checkpoints) {
      throw std::invalid_argument("summarize: trials use different checkpoint grids");
    }
    samples.push_back(t.cum_regret);
  }
  WaldBand band = wald_band(samples);
  curve.mean = std::move(band.mean);
  curve.half_width = std::move(band.half_width);
  bool positive = true;
  const double start = static_cast<double>(curve.checkpoints.back()) / 64.0;
  for (std::size_t i = 0; i < curve.mean.size(); ++i) {
    if (static_cast<double>(curve.checkpoints[i]) >= start && !(curve.mean[i] > 0.0)) {
      positive = false;
    }
  }
  // A zero-regret curve (the oracle) has no log-log slope; report 0.
  if (positive && curve.checkpoints.size() >= 3) {
    const SlopeFit fit = loglog_slope(curve.checkpoints, curve.mean);
    curve.slope = fit.slope;
    curve.slope_stderr = fit.stderr_;
    curve.intercept = fit.intercept;
  }
  return curve;
}

const PolicyOutcome& ExperimentResult::at(PolicyKind kind) const {
  for (const PolicyOutcome& o : outcomes) {
    if (o.kind == kind) return o;
  }
  throw std::out_of_range("experiment has no results for policy " + to_string(kind));
}

ExperimentBatch run_batch(const EnvSpec& spec, const std::vector<PolicyKind>& policies,
                          std::int64_t horizon, int trials, std::uint64_t base_seed,
                          const TrialOptions& options, int jobs) {
  if (trials < 2) throw std::invalid_argument("run_experiment: at least 2 trials are required");
  if (policies.empty()) throw std::invalid_argument("run_experiment: no policies");
  const TrialSetup setup = make_setup(spec, horizon, options.policy);
  const std::size_t n_policies = policies.size();
  const std::size_t n_tasks = n_policies * static_cast<std::size_t>(trials);
  std::vector<std::optional<TrialResult>> results(n_tasks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const std::size_t trial = task / n_policies;
      const PolicyKind kind = policies[task % n_policies];
      try {
        results[task] = play(spec, kind, horizon, base_seed + trial, options, setup);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(n_tasks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  ExperimentBatch batch;
  batch.policies = policies;
  batch.trials.resize(n_policies);
  batch.failure = failure;
  for (std::size_t p = 0; p < n_policies; ++p) {
    for (int trial = 0; trial < trials; ++trial) {
      batch.trials[p].push_back(std::move(results[static_cast<std::size_t>(trial) * n_policies + p]));
    }
  }
  return batch;
}

ExperimentResult run_experiment(const EnvSpec& spec, const std::vector<PolicyKind>& policies,
                                std::int64_t horizon, int trials, std::uint64_t base_seed,
                                const TrialOptions& options, int jobs) {
  ExperimentBatch batch = run_batch(spec, policies, horizon, trials, base_seed, options, jobs);
  if (batch.failure) std::rethrow_exception(batch.failure);
  ExperimentResult experiment;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    PolicyOutcome outcome{policies[p], {}, {}};
    for (std::optional<TrialResult>& t : batch.trials[p]) outcome.trials.push_back(std::move(*t));
    outcome.curve = summarize(outcome.trials);
    experiment.outcomes.push_back(std::move(outcome));
  }
  return experiment;
}

}  // namespace pricing_lab
