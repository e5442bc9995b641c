#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pricing_lab/environments.hpp"
#include "pricing_lab/likelihood.hpp"
#include "pricing_lab/link_math.hpp"
#include "pricing_lab/ons.hpp"

namespace pricing_lab {

struct PolicyDiagnostics {
  std::size_t price_clamps = 0;
  std::size_t projection_nonconvergences = 0;
  std::size_t refits = 0;
  std::size_t line_search_stalls = 0;
};

/// Common interface used by the trial loop.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double propose(const Eigen::VectorXd& x) = 0;
  virtual void observe(const Observation& obs) = 0;
  virtual ParamPair estimate() const = 0;
  virtual const PolicyDiagnostics& diagnostics() const = 0;
};

/// Greedy price with the hypothesis inputs clamped to the feasible range:
/// u = max(x'theta, 0), beta = clamp(x'eta, c_beta, 1).
double clamped_greedy_price(const LinkModel& link, const PricingConstants& constants,
                            const ParamPair& params, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Pricing with Perturbation

class PwpPolicy final : public Policy {
 public:
  struct Quote {
    double price = 0.0;
    double greedy = 0.0;
    int sign = 1;
  };

  PwpPolicy(LinkModel link, PricingConstants constants, const OnsHyper& hyper,
            const ParamPair& start, std::uint64_t seed);

  /// Greedy price plus a fair +/- delta coin flip, clamped to [c1, c2].
  Quote price(const Eigen::VectorXd& x);
  /// Same as price() with the sign forced (+1 or -1); does not touch the RNG.
  Quote price_with_sign(const Eigen::VectorXd& x, int sign);
  /// One ONS round on the gradient of this observation's negative log-likelihood.
  void update(const Observation& obs, OnsRoundInfo* info = nullptr);

  double propose(const Eigen::VectorXd& x) override { return price(x).price; }
  void observe(const Observation& obs) override { update(obs); }
  ParamPair estimate() const override { return ons_.params; }
  const PolicyDiagnostics& diagnostics() const override { return diagnostics_; }

  const OnsState& ons() const { return ons_; }
  const PricingConstants& constants() const { return constants_; }

  /// Test hook: when set, gradients fed to ONS are scaled by this factor.
  void set_gradient_fault(double scale) { gradient_fault_ = scale; }

 private:
  LinkModel link_;
  PricingConstants constants_;
  OnsState ons_;
  Rng signs_;
  PolicyDiagnostics diagnostics_;
  double gradient_fault_ = 1.0;
};

// ---------------------------------------------------------------------------
// Maximum likelihood

enum class MleModel { kGlmHeteroscedastic, kGlmHomoscedastic, kValuationHeteroscedastic };

enum class MleStatus { kConverged, kMaxIterations, kLineSearchStalled };

struct MleOptions {
  int starts = 1;
  int max_iterations = 5000;
  double gradient_tolerance = 1e-8;
  double armijo = 1e-4;
  std::uint64_t seed = 0;
  std::optional<ParamPair> initial;
  bool record_trace = false;
};

struct MleResult {
  ParamPair params;
  double objective = 0.0;  // mean negative log-likelihood
  int iterations = 0;
  MleStatus status = MleStatus::kConverged;
  std::vector<double> trace;  // objective per accepted iterate of the winning start
};

/// Fixed eta used by the homoscedastic model: all-ones direction, unit norm.
Eigen::VectorXd homoscedastic_eta(int d);

/// Mean negative log-likelihood of the history under the given model.
double mle_objective(const LinkModel& link, std::span<const Observation> history, MleModel model,
                     const ParamPair& params);

/// Minimizes the mean negative log-likelihood over the product of unit balls
/// by projected gradient descent with Armijo backtracking.
MleResult mle_fit(const LinkModel& link, std::span<const Observation> history, MleModel model,
                  const MleOptions& options = {});

// ---------------------------------------------------------------------------
// RMLP-2 baselines

enum class Rmlp2Variant { kModifiedHeteroscedastic, kOriginalHomoscedastic, kValuation };

MleModel mle_model_for(Rmlp2Variant variant);

/// Epoch-based explore-then-exploit baseline. Pure exploration happens on
/// the triangular rounds t = k(k+1)/2; the fit is refreshed right after each
/// exploration observation and held fixed until the next one.
class Rmlp2Policy final : public Policy {
 public:
  Rmlp2Policy(LinkModel link, PricingConstants constants, Rmlp2Variant variant,
              const ParamPair& initial, std::uint64_t seed, int restarts = 8);

  double price(const Eigen::VectorXd& x);
  void update(const Observation& obs);

  double propose(const Eigen::VectorXd& x) override { return price(x); }
  void observe(const Observation& obs) override { update(obs); }
  ParamPair estimate() const override { return fit_; }
  const PolicyDiagnostics& diagnostics() const override { return diagnostics_; }

  /// Price the current fit would charge at x (no side effects).
  double exploit_price(const Eigen::VectorXd& x) const;

  std::int64_t round() const { return round_; }
  /// Index k of the epoch containing the current round (0 before the first).
  std::int64_t epoch_index() const;
  bool last_round_explored() const { return pending_exploration_ || last_explored_; }
  const std::vector<Observation>& exploration_history() const { return history_; }
  const ParamPair& current_fit() const { return fit_; }
  Rmlp2Variant variant() const { return variant_; }

 private:
  LinkModel link_;
  PricingConstants constants_;
  Rmlp2Variant variant_;
  ParamPair fit_;
  Rng exploration_;
  std::uint64_t seed_;
  int restarts_;
  std::int64_t round_ = 0;
  bool pending_exploration_ = false;
  bool last_explored_ = false;
  std::vector<Observation> history_;
  PolicyDiagnostics diagnostics_;
};

// ---------------------------------------------------------------------------
// Reference policies for tests and sanity checks

/// Charges the optimal price for the true environment.
class OraclePolicy final : public Policy {
 public:
  OraclePolicy(LinkModel link, const EnvSpec& env) : link_(link), env_(&env) {}
  double propose(const Eigen::VectorXd& x) override;
  void observe(const Observation&) override {}
  ParamPair estimate() const override { return ParamPair(env_->theta_star, env_->eta_star); }
  const PolicyDiagnostics& diagnostics() const override { return diagnostics_; }

 private:
  LinkModel link_;
  const EnvSpec* env_;
  PolicyDiagnostics diagnostics_;
};

/// Charges the same price every round.
class ConstantPricePolicy final : public Policy {
 public:
  ConstantPricePolicy(double price, int d) : price_(price), d_(d) {}
  double propose(const Eigen::VectorXd&) override { return price_; }
  void observe(const Observation&) override {}
  ParamPair estimate() const override {
    return ParamPair(Eigen::VectorXd::Zero(d_), Eigen::VectorXd::Zero(d_));
  }
  const PolicyDiagnostics& diagnostics() const override { return diagnostics_; }

 private:
  double price_;
  int d_;
  PolicyDiagnostics diagnostics_;
};

}  // namespace pricing_lab
