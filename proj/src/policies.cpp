#include "pricing_lab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pricing_lab {

double clamped_greedy_price(const LinkModel& link, const PricingConstants& constants,
                            const ParamPair& params, const Eigen::VectorXd& x) {
  const double u = std::max(x.dot(params.theta), 0.0);
  const double beta = std::clamp(x.dot(params.eta), constants.c_beta, 1.0);
  return greedy_price(link, u, beta);
}

// ---------------------------------------------------------------------------
// PwP

PwpPolicy::PwpPolicy(LinkModel link, PricingConstants constants, const OnsHyper& hyper,
                     const ParamPair& start, std::uint64_t seed)
    : link_(link),
      constants_(constants),
      ons_(ons_init(hyper, start.dim(), start)),
      signs_(make_stream(seed, stream::kPerturbation)) {}

PwpPolicy::Quote PwpPolicy::price(const Eigen::VectorXd& x) {
  const int sign = (signs_() >> 63) != 0 ? 1 : -1;
  return price_with_sign(x, sign);
}

PwpPolicy::Quote PwpPolicy::price_with_sign(const Eigen::VectorXd& x, int sign) {
  Quote q;
  q.sign = sign >= 0 ? 1 : -1;
  q.greedy = clamped_greedy_price(link_, constants_, ons_.params, x);
  const double raw = q.greedy + q.sign * constants_.delta;
  q.price = std::clamp(raw, constants_.c1, constants_.c2);
  if (q.price != raw) ++diagnostics_.price_clamps;
  return q;
}

void PwpPolicy::update(const Observation& obs, OnsRoundInfo* info) {
  Eigen::VectorXd grad = nll_grad(link_, ons_.params, obs);
  if (gradient_fault_ != 1.0) grad *= gradient_fault_;
  OnsRoundInfo local;
  OnsRoundInfo& round_info = info != nullptr ? *info : local;
  ons_ = ons_round(std::move(ons_), grad, &round_info, info != nullptr);
  if (!round_info.converged) ++diagnostics_.projection_nonconvergences;
}

// ---------------------------------------------------------------------------
// MLE

namespace {

constexpr double kMinElasticity = 1e-9;

Eigen::VectorXd project_ball(const Eigen::VectorXd& z) {
  const double n = z.norm();
  return n > 1.0 ? Eigen::VectorXd(z / n) : z;
}

class MleProblem {
 public:
  MleProblem(const LinkModel& link, std::span<const Observation> history, MleModel model)
      : link_(link), model_(model) {
    if (history.empty()) throw std::invalid_argument("mle_fit: history is empty");
    d_ = static_cast<int>(history.front().x.size());
    const auto n = static_cast<Eigen::Index>(history.size());
    x_.resize(n, d_);
    p_.resize(n);
    bought_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Observation& obs = history[static_cast<std::size_t>(i)];
      if (obs.x.size() != d_) throw std::invalid_argument("mle_fit: ragged contexts");
      x_.row(i) = obs.x.transpose();
      p_[i] = obs.p;
      bought_[static_cast<std::size_t>(i)] = obs.bought;
    }
    if (model == MleModel::kGlmHomoscedastic) fixed_eta_ = homoscedastic_eta(d_);
  }

  int dim() const { return model_ == MleModel::kGlmHomoscedastic ? d_ : 2 * d_; }

  Eigen::VectorXd pack(const ParamPair& p) const {
    return model_ == MleModel::kGlmHomoscedastic ? p.theta : p.combined();
  }

  ParamPair unpack(const Eigen::VectorXd& z) const {
    if (model_ == MleModel::kGlmHomoscedastic) return ParamPair(z, fixed_eta_);
    return ParamPair::from_combined(z);
  }

  // Directions orthogonal to every observed context are not identified by the
  // likelihood; they stay at the anchor's values and only the identified
  // part is optimized (over the slice of each unit ball).
  void set_anchor(const ParamPair& anchor) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x_, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > 1e-10 * sv[0]) ++rank;
    if (rank == d_) {
      span_.reset();
      return;
    }
    const Eigen::MatrixXd basis = svd.matrixV().leftCols(rank);
    span_ = basis * basis.transpose();
    const Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(d_, d_) - *span_;
    fixed_theta_ = complement * anchor.theta;
    fixed_eta_part_ = complement * anchor.eta;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    if (!span_) {
      return model_ == MleModel::kGlmHomoscedastic ? project_ball(z) : project_unit_balls(z);
    }
    Eigen::VectorXd out(z.size());
    out.head(d_) = project_slice(z.head(d_), fixed_theta_);
    if (model_ != MleModel::kGlmHomoscedastic) {
      out.tail(d_) = project_slice(z.tail(d_), fixed_eta_part_);
    }
    return out;
  }

  // Mean negative log-likelihood; +inf outside the model's domain. When grad
  // is non-null it receives the gradient.
  double evaluate(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const {
    const ParamPair params = unpack(z);
    const Eigen::VectorXd a = x_ * params.theta;
    const Eigen::VectorXd b = x_ * params.eta;
    const Eigen::Index n = x_.rows();
    Eigen::VectorXd slope_theta(n), slope_eta(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double index = 0.0;
      if (model_ == MleModel::kValuationHeteroscedastic) {
        if (b[i] <= kMinElasticity) return std::numeric_limits<double>::infinity();
        index = (p_[i] - a[i]) / b[i];
      } else {
        index = b[i] * p_[i] - a[i];
      }
      const NllPoint point = nll_point(link_, index, bought_[static_cast<std::size_t>(i)]);
      total += point.value;
      if (model_ == MleModel::kValuationHeteroscedastic) {
        slope_theta[i] = -point.slope / b[i];
        slope_eta[i] = -point.slope * index / b[i];
      } else {
        slope_theta[i] = -point.slope;
        slope_eta[i] = point.slope * p_[i];
      }
    }
    const double scale = 1.0 / static_cast<double>(n);
    if (grad != nullptr) {
      grad->resize(dim());
      grad->head(d_).noalias() = scale * (x_.transpose() * slope_theta);
      if (model_ != MleModel::kGlmHomoscedastic) {
        grad->tail(d_).noalias() = scale * (x_.transpose() * slope_eta);
      }
    }
    return total * scale;
  }

 private:
  const LinkModel& link_;
  MleModel model_;
  int d_ = 0;
  Eigen::MatrixXd x_;
  Eigen::VectorXd p_;
  std::vector<bool> bought_;
  Eigen::VectorXd fixed_eta_;
  std::optional<Eigen::MatrixXd> span_;
  Eigen::VectorXd fixed_theta_, fixed_eta_part_;

  Eigen::VectorXd project_slice(const Eigen::VectorXd& block, const Eigen::VectorXd& fixed) const {
    Eigen::VectorXd v = *span_ * block;
    const double radius = std::sqrt(std::max(0.0, 1.0 - fixed.squaredNorm()));
    const double n = v.norm();
    if (n > radius) v *= radius / n;
    return v + fixed;
  }
};

MleResult descend(const MleProblem& problem, const Eigen::VectorXd& start,
                  const MleOptions& options) {
  MleResult result;
  Eigen::VectorXd z = problem.project(start);
  Eigen::VectorXd grad(problem.dim());
  double value = problem.evaluate(z, &grad);
  if (!std::isfinite(value)) {
    throw std::domain_error("mle_fit: objective is not finite at the starting point");
  }
  if (options.record_trace) result.trace.push_back(value);
  result.status = MleStatus::kMaxIterations;
  double step = 1.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd pg = z - problem.project(z - grad);
    if (pg.norm() <= options.gradient_tolerance) {
      result.status = MleStatus::kConverged;
      break;
    }
    // Backtracking by halving; each search opens at twice the last accepted step.
    step = std::min(1.0, 2.0 * step);
    bool accepted = false;
    Eigen::VectorXd trial;
    Eigen::VectorXd trial_grad(problem.dim());
    double trial_value = 0.0;
    while (step >= 1e-20) {
      trial = problem.project(z - step * grad);
      trial_value = problem.evaluate(trial, &trial_grad);
      if (std::isfinite(trial_value) &&
          trial_value <= value - options.armijo * grad.dot(z - trial)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.status = MleStatus::kLineSearchStalled;
      break;
    }
    z = std::move(trial);
    grad = std::move(trial_grad);
    value = trial_value;
    if (options.record_trace) result.trace.push_back(value);
  }
  result.iterations = it;
  result.objective = value;
  result.params = problem.unpack(z);
  return result;
}

ParamPair random_start(Rng& rng, int d) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> positive(0.3, 1.0);
  Eigen::VectorXd theta(d), eta(d);
  for (int i = 0; i < d; ++i) theta[i] = unit(rng);
  for (int i = 0; i < d; ++i) eta[i] = positive(rng);
  theta *= unit(rng) / std::max(theta.norm(), 1e-12);
  eta *= positive(rng) / eta.norm();
  return ParamPair(theta, eta);
}

}  // namespace

Eigen::VectorXd homoscedastic_eta(int d) {
  return Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

double mle_objective(const LinkModel& link, std::span<const Observation> history, MleModel model,
                     const ParamPair& params) {
  const MleProblem problem(link, history, model);
  return problem.evaluate(problem.pack(params), nullptr);
}

MleResult mle_fit(const LinkModel& link, std::span<const Observation> history, MleModel model,
                  const MleOptions& options) {
  MleProblem problem(link, history, model);
  const int d = static_cast<int>(history.front().x.size());
  const ParamPair initial = options.initial.value_or(ParamPair::uniform_direction(d, 0.5));
  if (initial.dim() != d) throw std::invalid_argument("mle_fit: initial point has wrong dimension");
  problem.set_anchor(initial);

  std::optional<MleResult> best;
  auto run_from = [&](const Eigen::VectorXd& start) {
    const Eigen::VectorXd feasible = problem.project(start);
    if (!std::isfinite(problem.evaluate(feasible, nullptr))) return;
    MleResult candidate = descend(problem, feasible, options);
    if (!best || candidate.objective < best->objective) best = std::move(candidate);
  };
  run_from(problem.pack(initial));
  const int starts = model == MleModel::kValuationHeteroscedastic ? options.starts : 1;
  if (starts > 1) {
    Rng rng = make_stream(options.seed, stream::kRestarts);
    for (int s = 1; s < starts; ++s) run_from(problem.pack(random_start(rng, d)));
  }
  // The valuation model is undefined where x'eta <= 0; fall back to the
  // default start if no start so far was inside its domain.
  if (!best) run_from(problem.pack(ParamPair::uniform_direction(d, 0.5)));
  if (!best) throw std::domain_error("mle_fit: objective is not finite at any starting point");
  return std::move(*best);
}

// ---------------------------------------------------------------------------
// RMLP-2

MleModel mle_model_for(Rmlp2Variant variant) {
  switch (variant) {
    case Rmlp2Variant::kModifiedHeteroscedastic:
      return MleModel::kGlmHeteroscedastic;
    case Rmlp2Variant::kOriginalHomoscedastic:
      return MleModel::kGlmHomoscedastic;
    case Rmlp2Variant::kValuation:
      return MleModel::kValuationHeteroscedastic;
  }
  return MleModel::kGlmHeteroscedastic;
}

Rmlp2Policy::Rmlp2Policy(LinkModel link, PricingConstants constants, Rmlp2Variant variant,
                         const ParamPair& initial, std::uint64_t seed, int restarts)
    : link_(link),
      constants_(constants),
      variant_(variant),
      fit_(initial),
      exploration_(make_stream(seed, stream::kExploration)),
      seed_(seed),
      restarts_(restarts) {
  if (variant == Rmlp2Variant::kOriginalHomoscedastic) fit_.eta = homoscedastic_eta(initial.dim());
}

std::int64_t Rmlp2Policy::epoch_index() const {
  std::int64_t k = 0;
  while ((k + 1) * (k + 2) / 2 <= round_) ++k;
  return k;
}

double Rmlp2Policy::exploit_price(const Eigen::VectorXd& x) const {
  double price = 0.0;
  if (variant_ == Rmlp2Variant::kValuation) {
    // y = x'theta + (x'eta) N gives P(buy) = S(p / b - a / b).
    const double b = std::max(x.dot(fit_.eta), constants_.c_beta);
    const double a = std::max(x.dot(fit_.theta), 0.0);
    price = greedy_price(link_, a / b, 1.0 / b);
  } else {
    price = clamped_greedy_price(link_, constants_, fit_, x);
  }
  return std::clamp(price, constants_.c1, constants_.c2);
}

double Rmlp2Policy::price(const Eigen::VectorXd& x) {
  ++round_;
  last_explored_ = false;
  if (is_triangular(round_)) {
    pending_exploration_ = true;
    std::uniform_real_distribution<double> uniform(constants_.c1, constants_.c2);
    return uniform(exploration_);
  }
  pending_exploration_ = false;
  return exploit_price(x);
}

void Rmlp2Policy::update(const Observation& obs) {
  if (!pending_exploration_) return;
  pending_exploration_ = false;
  last_explored_ = true;
  history_.push_back(obs);
  MleOptions options;
  options.starts = restarts_;
  options.seed = seed_ + static_cast<std::uint64_t>(history_.size());
  options.initial = fit_;
  MleResult fitted = mle_fit(link_, history_, mle_model_for(variant_), options);
  if (fitted.status == MleStatus::kLineSearchStalled) ++diagnostics_.line_search_stalls;
  fit_ = std::move(fitted.params);
  ++diagnostics_.refits;
}

double OraclePolicy::propose(const Eigen::VectorXd& x) {
  const TrueIndex truth = true_index(*env_, x);
  return greedy_price(link_, truth.u, truth.beta);
}

}  // namespace pricing_lab
