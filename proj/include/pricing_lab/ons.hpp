#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "pricing_lab/likelihood.hpp"
#include "pricing_lab/link_math.hpp"

namespace pricing_lab {

struct OnsHyper {
  double gamma = 0.0;
  double epsilon = 0.0;
};

/// gamma = 1/2 min{1/(4 G D), c_e} and epsilon = 1/(gamma^2 D^2).
OnsHyper default_hyperparameters(const PricingConstants& constants);

/// epsilon = 1/(gamma^2 D^2) for an externally chosen gamma.
OnsHyper hyperparameters_for_gamma(double gamma, double d_diam);

/// Online Newton Step state. One per trial; never shared.
struct OnsState {
  ParamPair params;
  Eigen::MatrixXd a_matrix;   // A_t = eps I + sum g g'
  Eigen::MatrixXd a_inverse;  // maintained by rank-one updates
  double gamma = 0.0;
  double epsilon = 0.0;
  std::int64_t step_count = 0;
};

OnsState ons_init(const PricingConstants& constants, int d, const ParamPair& start);
OnsState ons_init(const OnsHyper& hyper, int d, const ParamPair& start);

/// A += g g'; A^{-1} updated with the Sherman-Morrison-Woodbury identity.
OnsState woodbury_update(OnsState state, const Eigen::VectorXd& grad);

/// Unprojected iterate params - (1/gamma) A^{-1} grad. Call after woodbury_update.
Eigen::VectorXd newton_step(const OnsState& state, const Eigen::VectorXd& grad);

struct ProjectionResult {
  ParamPair params;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;  // last iterate movement
};

/// argmin over the product of unit balls of (z - point)' A (z - point), by
/// projected gradient descent with step 1/lambda_max(A).
ProjectionResult a_norm_project(const Eigen::MatrixXd& a_matrix, const Eigen::VectorXd& point);
ProjectionResult a_norm_project(const OnsState& state, const Eigen::VectorXd& point);

/// Per-round diagnostics.
struct OnsRoundInfo {
  std::int64_t step = 0;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  double projection_residual = 0.0;
  bool projected = false;
  bool converged = true;
};

/// woodbury_update, newton_step and a_norm_project in order. When info is
/// non-null it is filled; lambda_min only when with_spectrum is set.
OnsState ons_round(OnsState state, const Eigen::VectorXd& grad, OnsRoundInfo* info = nullptr,
                   bool with_spectrum = false);

/// ||A A^{-1} - I||_inf (max absolute entry).
double inverse_drift(const OnsState& state);

/// Recomputes A^{-1} from A directly.
void resync_inverse(OnsState& state);

/// Euclidean projection of each half of [theta; eta] onto its unit ball.
Eigen::VectorXd project_unit_balls(const Eigen::VectorXd& z);

}  // namespace pricing_lab
