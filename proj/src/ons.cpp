#include "pricing_lab/ons.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace pricing_lab {
namespace {

constexpr int kPowerIterations = 50;
constexpr int kMaxProjectionSteps = 10000;
constexpr double kProjectionTolerance = 1e-10;
constexpr std::int64_t kDriftCheckPeriod = 1024;
constexpr double kDriftLimit = 1e-6;

double lambda_max(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < kPowerIterations; ++i) {
    const Eigen::VectorXd av = a * v;
    lambda = av.norm();
    if (lambda == 0.0) break;
    v = av / lambda;
  }
  return lambda;
}

bool inside(const Eigen::VectorXd& z) {
  const Eigen::Index d = z.size() / 2;
  return z.head(d).norm() <= 1.0 && z.tail(d).norm() <= 1.0;
}

}  // namespace

Eigen::VectorXd project_unit_balls(const Eigen::VectorXd& z) {
  const Eigen::Index d = z.size() / 2;
  Eigen::VectorXd out = z;
  const double nt = z.head(d).norm();
  const double ne = z.tail(d).norm();
  if (nt > 1.0) out.head(d) /= nt;
  if (ne > 1.0) out.tail(d) /= ne;
  return out;
}

OnsHyper default_hyperparameters(const PricingConstants& constants) {
  const double gamma =
      0.5 * std::min(1.0 / (4.0 * constants.g_bound * constants.d_diam), constants.c_e);
  return hyperparameters_for_gamma(gamma, constants.d_diam);
}

OnsHyper hyperparameters_for_gamma(double gamma, double d_diam) {
  if (!(gamma > 0.0) || !(d_diam > 0.0)) {
    throw std::invalid_argument("ONS: gamma and diameter must be positive");
  }
  return {gamma, 1.0 / (gamma * gamma * d_diam * d_diam)};
}

OnsState ons_init(const PricingConstants& constants, int d, const ParamPair& start) {
  return ons_init(default_hyperparameters(constants), d, start);
}

OnsState ons_init(const OnsHyper& hyper, int d, const ParamPair& start) {
  if (!(hyper.gamma > 0.0) || !(hyper.epsilon > 0.0) || !std::isfinite(hyper.epsilon)) {
    throw std::invalid_argument("ONS: gamma and epsilon must be positive and finite");
  }
  if (start.dim() != d) throw std::invalid_argument("ONS: start has wrong dimension");
  if (!start.in_unit_balls()) throw std::invalid_argument("ONS: start is not feasible");
  OnsState s;
  s.params = start;
  s.gamma = hyper.gamma;
  s.epsilon = hyper.epsilon;
  s.a_matrix = hyper.epsilon * Eigen::MatrixXd::Identity(2 * d, 2 * d);
  s.a_inverse = (1.0 / hyper.epsilon) * Eigen::MatrixXd::Identity(2 * d, 2 * d);
  return s;
}

OnsState woodbury_update(OnsState state, const Eigen::VectorXd& grad) {
  if (grad.size() != state.a_matrix.rows()) {
    throw std::invalid_argument("woodbury_update: gradient has wrong dimension");
  }
  const Eigen::VectorXd ag = state.a_inverse * grad;
  const double denom = 1.0 + grad.dot(ag);
  assert(denom > 0.0);
  state.a_matrix.noalias() += grad * grad.transpose();
  state.a_inverse.noalias() -= (ag * ag.transpose()) / denom;
  return state;
}

Eigen::VectorXd newton_step(const OnsState& state, const Eigen::VectorXd& grad) {
  return state.params.combined() - (1.0 / state.gamma) * (state.a_inverse * grad);
}

ProjectionResult a_norm_project(const Eigen::MatrixXd& a_matrix, const Eigen::VectorXd& point) {
  ProjectionResult result;
  if (inside(point)) {
    result.params = ParamPair::from_combined(point);
    return result;
  }
  const double step = 1.0 / lambda_max(a_matrix);
  Eigen::VectorXd z = project_unit_balls(point);
  result.converged = false;
  for (int it = 1; it <= kMaxProjectionSteps; ++it) {
    const Eigen::VectorXd next = project_unit_balls(z - step * (a_matrix * (z - point)));
    result.residual = (next - z).norm();
    result.iterations = it;
    z = next;
    if (result.residual <= kProjectionTolerance) {
      result.converged = true;
      break;
    }
  }
  result.params = ParamPair::from_combined(z);
  return result;
}

ProjectionResult a_norm_project(const OnsState& state, const Eigen::VectorXd& point) {
  return a_norm_project(state.a_matrix, point);
}

OnsState ons_round(OnsState state, const Eigen::VectorXd& grad, OnsRoundInfo* info,
                   bool with_spectrum) {
  state = woodbury_update(std::move(state), grad);
  const Eigen::VectorXd target = newton_step(state, grad);
  ProjectionResult proj = a_norm_project(state, target);
  state.params = std::move(proj.params);
  ++state.step_count;
  if (state.step_count % kDriftCheckPeriod == 0 && inverse_drift(state) > kDriftLimit) {
    resync_inverse(state);
  }
  if (info != nullptr) {
    info->step = state.step_count;
    info->grad_norm = grad.norm();
    info->projected = proj.iterations > 0;
    info->projection_residual = proj.residual;
    info->converged = proj.converged;
    if (with_spectrum) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.a_matrix, Eigen::EigenvaluesOnly);
      info->lambda_min = eig.eigenvalues().minCoeff();
    }
  }
  return state;
}

double inverse_drift(const OnsState& state) {
  const Eigen::Index n = state.a_matrix.rows();
  return (state.a_matrix * state.a_inverse - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

void resync_inverse(OnsState& state) {
  const Eigen::Index n = state.a_matrix.rows();
  state.a_inverse = state.a_matrix.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace pricing_lab
