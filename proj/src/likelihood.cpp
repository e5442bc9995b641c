#include "pricing_lab/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pricing_lab {

ParamPair::ParamPair(Eigen::VectorXd theta_in, Eigen::VectorXd eta_in)
    : theta(std::move(theta_in)), eta(std::move(eta_in)) {
  if (theta.size() != eta.size()) {
    throw std::invalid_argument("ParamPair: theta and eta must have equal dimension");
  }
}

Eigen::VectorXd ParamPair::combined() const {
  Eigen::VectorXd z(theta.size() + eta.size());
  z << theta, eta;
  return z;
}

ParamPair ParamPair::from_combined(const Eigen::VectorXd& z) {
  if (z.size() % 2 != 0) throw std::invalid_argument("ParamPair: combined vector has odd size");
  const Eigen::Index d = z.size() / 2;
  return ParamPair(z.head(d), z.tail(d));
}

ParamPair ParamPair::uniform_direction(int d, double norm) {
  if (d < 1) throw std::invalid_argument("ParamPair: d must be >= 1");
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(d, norm / std::sqrt(static_cast<double>(d)));
  return ParamPair(v, v);
}

bool ParamPair::in_unit_balls(double tol) const {
  return theta.norm() <= 1.0 + tol && eta.norm() <= 1.0 + tol;
}

bool ParamPair::operator==(const ParamPair& other) const {
  return theta.size() == other.theta.size() && theta == other.theta && eta == other.eta;
}

double demand_index(const ParamPair& params, const Observation& obs) {
  return obs.x.dot(params.eta) * obs.p - obs.x.dot(params.theta);
}

double nll(const LinkModel& link, const ParamPair& params, const Observation& obs,
           std::size_t* clamp_events) {
  const double w = demand_index(params, obs);
  // Probability of the observed outcome is S(v) and of the other one S(-v).
  const double v = obs.bought ? w : -w;
  const double prob = link.survival(v);
  if (prob <= 0.5) {
    const double clamped = std::max(prob, kProbabilityFloor);
    if (clamp_events != nullptr && clamped != prob) ++*clamp_events;
    return -std::log(clamped);
  }
  const double other = link.survival(-v);
  const double clamped = std::max(other, kProbabilityFloor);
  if (clamp_events != nullptr && clamped != other) ++*clamp_events;
  return -std::log1p(-clamped);
}

double nll_slope(const LinkModel& link, double w, bool bought) {
  // -(1{buy} s/S - 1{no buy} s/(1-S)) with s = -f.
  return bought ? link.hazard(w) : -link.reverse_hazard(w);
}

NllPoint nll_point(const LinkModel& link, double w, bool bought) {
  // 1 - S(w) = S(-w) and the reverse hazard at w is the hazard at -w.
  const double v = bought ? w : -w;
  const LinkModel::SurvivalHazard sh = link.survival_and_hazard(v);
  const double value = sh.survival <= 0.5
                           ? -std::log(std::max(sh.survival, kProbabilityFloor))
                           : -std::log1p(-std::max(link.survival(-v), kProbabilityFloor));
  return {value, bought ? sh.hazard : -sh.hazard};
}

double nll_curvature(const LinkModel& link, double w, bool bought) {
  return bought ? -link.log_survival_curvature(w) : -link.log_cdf_curvature(w);
}

Eigen::VectorXd nll_grad(const LinkModel& link, const ParamPair& params, const Observation& obs) {
  const double slope = nll_slope(link, demand_index(params, obs), obs.bought);
  const Eigen::Index d = obs.x.size();
  Eigen::VectorXd g(2 * d);
  g.head(d) = -slope * obs.x;
  g.tail(d) = (slope * obs.p) * obs.x;
  return g;
}

Eigen::MatrixXd nll_hessian(const LinkModel& link, const ParamPair& params,
                            const Observation& obs) {
  const double curvature = nll_curvature(link, demand_index(params, obs), obs.bought);
  const Eigen::Index d = obs.x.size();
  Eigen::VectorXd v(2 * d);
  v.head(d) = -obs.x;
  v.tail(d) = obs.p * obs.x;
  return curvature * (v * v.transpose());
}

double cumulative_nll(const LinkModel& link, const ParamPair& params,
                      std::span<const Observation> history) {
  double total = 0.0;
  for (const Observation& obs : history) total += nll(link, params, obs);
  return total;
}

}  // namespace pricing_lab
