#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "pricing_lab/link_math.hpp"

namespace pricing_lab {

/// A hypothesis [theta; eta] in R^{2d}.
struct ParamPair {
  Eigen::VectorXd theta;
  Eigen::VectorXd eta;

  ParamPair() = default;
  ParamPair(Eigen::VectorXd theta_in, Eigen::VectorXd eta_in);

  int dim() const { return static_cast<int>(theta.size()); }
  Eigen::VectorXd combined() const;
  static ParamPair from_combined(const Eigen::VectorXd& z);

  /// All-ones direction in each block, scaled to the given Euclidean norm.
  static ParamPair uniform_direction(int d, double norm);

  /// ||theta|| <= 1 + tol and ||eta|| <= 1 + tol.
  bool in_unit_balls(double tol = 1e-12) const;

  bool operator==(const ParamPair& other) const;
};

struct Observation {
  Eigen::VectorXd x;
  double p = 0.0;
  bool bought = false;
};

/// Linear index w = x'eta * p - x'theta.
double demand_index(const ParamPair& params, const Observation& obs);

/// Probability floor applied before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

/// Negative log-likelihood of one observation. When clamp_events is given it
/// is incremented whenever the probability floor was applied.
double nll(const LinkModel& link, const ParamPair& params, const Observation& obs,
           std::size_t* clamp_events = nullptr);

/// dl/dw for an observation at index w.
double nll_slope(const LinkModel& link, double w, bool bought);
struct NllPoint {
  double value;
  double slope;
};
/// nll value (with the probability floor) and nll_slope at index w together.
NllPoint nll_point(const LinkModel& link, double w, bool bought);

/// d^2 l / dw^2 for an observation at index w (non-negative).
double nll_curvature(const LinkModel& link, double w, bool bought);

/// Gradient with respect to [theta; eta]: nll_slope(w) * [-x; p x].
Eigen::VectorXd nll_grad(const LinkModel& link, const ParamPair& params, const Observation& obs);

/// Hessian with respect to [theta; eta]; rank one, nll_curvature(w) * v v'
/// with v = [-x; p x].
Eigen::MatrixXd nll_hessian(const LinkModel& link, const ParamPair& params,
                            const Observation& obs);

/// L(theta, eta) = sum of nll over the history; 0 for an empty history.
double cumulative_nll(const LinkModel& link, const ParamPair& params,
                      std::span<const Observation> history);

}  // namespace pricing_lab
