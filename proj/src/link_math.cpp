#include "pricing_lab/link_math.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pricing_lab {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kContinuedFractionSwitch = 10.0;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

// Hazard lambda(z) together with lambda(z) - z, which cancels badly in the
// upper tail if formed by subtraction.
struct HazardPair {
  double lambda;
  double excess;  // lambda - z
};

HazardPair hazard_pair(double z) {
  if (z < kContinuedFractionSwitch) {
    const double q = 0.5 * std::erfc(z / std::numbers::sqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
    const double lambda = pdf / q;
    return {lambda, lambda - z};
  }
  // Laplace continued fraction for the Mills ratio:
  // 1/lambda = 1/(z + 1/(z + 2/(z + 3/(z + ...)))).
  double tail = z;
  for (int k = 20; k >= 2; --k) tail = z + k / tail;
  return {z + 1.0 / tail, 1.0 / tail};
}

// varphi without the domain check; +inf where the density underflows.
double varphi_unchecked(const LinkModel& link, double w) {
  const double z = w / link.sigma();
  const double lambda = hazard_pair(z).lambda;
  if (!(lambda > 0.0)) return INFINITY;
  return link.sigma() / lambda - w;
}

}  // namespace

double normal_hazard(double z) { return hazard_pair(z).lambda; }

LinkModel::LinkModel(double sigma, LinkKind kind) : sigma_(sigma), kind_(kind) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("link sigma must be positive and finite");
  }
}

double LinkModel::survival(double w) const {
  require_finite(w, "w");
  return 0.5 * std::erfc(w / (sigma_ * std::numbers::sqrt2));
}

double LinkModel::cdf(double w) const {
  require_finite(w, "w");
  return 0.5 * std::erfc(-w / (sigma_ * std::numbers::sqrt2));
}

double LinkModel::density(double w) const {
  require_finite(w, "w");
  const double z = w / sigma_;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z) / sigma_;
}

double LinkModel::density_deriv(double w) const {
  return -(w / (sigma_ * sigma_)) * density(w);
}

double LinkModel::hazard(double w) const {
  require_finite(w, "w");
  return hazard_pair(w / sigma_).lambda / sigma_;
}

double LinkModel::reverse_hazard(double w) const {
  require_finite(w, "w");
  return hazard_pair(-w / sigma_).lambda / sigma_;
}

LinkModel::SurvivalHazard LinkModel::survival_and_hazard(double w) const {
  require_finite(w, "w");
  const double z = w / sigma_;
  const double q = 0.5 * std::erfc(z / std::numbers::sqrt2);
  if (z < kContinuedFractionSwitch) {
    return {q, kInvSqrt2Pi * std::exp(-0.5 * z * z) / q / sigma_};
  }
  return {q, hazard_pair(z).lambda / sigma_};
}

double LinkModel::log_survival_curvature(double w) const {
  require_finite(w, "w");
  const HazardPair h = hazard_pair(w / sigma_);
  return -h.lambda * h.excess / (sigma_ * sigma_);
}

double LinkModel::log_cdf_curvature(double w) const {
  require_finite(w, "w");
  const HazardPair h = hazard_pair(-w / sigma_);
  return -h.lambda * h.excess / (sigma_ * sigma_);
}

double varphi(const LinkModel& link, double w) {
  require_finite(w, "w");
  const double v = varphi_unchecked(link, w);
  if (!std::isfinite(v)) {
    throw std::domain_error("varphi: density underflow at w = " + std::to_string(w));
  }
  return v;
}

double varphi_inv(const LinkModel& link, double u) {
  require_finite(u, "u");
  const double cap = 50.0 * link.sigma();
  double lo = -link.sigma();
  double hi = link.sigma();
  // varphi is decreasing: need varphi(lo) >= u >= varphi(hi).
  while (varphi_unchecked(link, lo) < u) {
    if (lo <= -cap) {
      throw std::domain_error("varphi_inv: no bracket below for u = " + std::to_string(u));
    }
    lo = std::max(2.0 * lo, -cap);
  }
  while (varphi_unchecked(link, hi) > u) {
    if (hi >= cap) {
      throw std::domain_error("varphi_inv: no bracket above for u = " + std::to_string(u));
    }
    hi = std::min(2.0 * hi, cap);
  }
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double gap = varphi_unchecked(link, mid) - u;
    if (std::abs(gap) <= 1e-12) break;
    if (gap > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * DBL_EPSILON * std::max(1.0, std::abs(mid))) break;
  }
  return mid;
}

double greedy_price(const LinkModel& link, double u, double beta) {
  require_finite(beta, "beta");
  if (!(beta > 0.0)) throw std::invalid_argument("greedy_price: beta must be positive");
  return (u + varphi_inv(link, u)) / beta;
}

double expected_reward(const LinkModel& link, double u, double beta, double p) {
  require_finite(p, "p");
  require_finite(beta, "beta");
  if (!(beta > 0.0)) throw std::invalid_argument("expected_reward: beta must be positive");
  if (p < 0.0) throw std::invalid_argument("expected_reward: price must be non-negative");
  return p * link.survival(beta * p - u);
}

double instant_regret(const LinkModel& link, double u_star, double beta_star, double p) {
  const double best = greedy_price(link, u_star, beta_star);
  const double gap =
      expected_reward(link, u_star, beta_star, best) - expected_reward(link, u_star, beta_star, p);
  return std::max(0.0, gap);
}

double elasticity(const LinkModel& link, double u, double beta, double p) {
  require_finite(beta, "beta");
  if (!(beta > 0.0)) throw std::invalid_argument("elasticity: beta must be positive");
  const double w = beta * p - u;
  if (link.survival(w) < DBL_MIN) {
    throw std::domain_error("elasticity: demand is degenerate (S ~ 0) at w = " + std::to_string(w));
  }
  return -beta * link.hazard(w) * p;
}

PricingConstants derive_constants(const LinkModel& link, double c_beta, int d,
                                  std::int64_t horizon) {
  if (!(c_beta > 0.0 && c_beta < 1.0)) {
    throw std::invalid_argument("derive_constants: c_beta must lie in (0, 1)");
  }
  if (d < 1) throw std::invalid_argument("derive_constants: d must be >= 1");
  if (horizon < 2) throw std::invalid_argument("derive_constants: T must be >= 2");

  PricingConstants c;
  c.c_beta = c_beta;
  c.d = d;
  c.horizon = horizon;
  c.j01 = greedy_price(link, 0.0, 1.0);
  c.c1 = c.j01 / 2.0;
  c.c2 = 2.0 * greedy_price(link, 1.0, c_beta);

  constexpr double kStep = 1e-3;
  const double w_lo = -1.0;
  const auto n = static_cast<long>(std::ceil((c.c2 - w_lo) / kStep));
  double worst_curvature = -INFINITY;
  double worst_gradient = 0.0;
  for (long i = 0; i <= n; ++i) {
    const double w = std::min(w_lo + static_cast<double>(i) * kStep, c.c2);
    const double curvature = std::max(link.log_survival_curvature(w), link.log_cdf_curvature(w));
    const double gradient = std::max(link.hazard(w), link.reverse_hazard(w));
    if (!std::isfinite(curvature) || !std::isfinite(gradient)) {
      throw std::domain_error("derive_constants: non-finite grid value at w = " +
                              std::to_string(w));
    }
    worst_curvature = std::max(worst_curvature, curvature);
    worst_gradient = std::max(worst_gradient, gradient);
  }
  c.c_l = -worst_curvature;
  c.c_g = worst_gradient;
  if (!(c.c_l > 0.0) || !(c.c_g > 0.0)) {
    throw std::domain_error("derive_constants: link is not strictly log-concave on the price range");
  }
  c.c_e = c.c_l / (c.c_g * c.c_g);
  c.g_bound = c.c_g * std::sqrt(1.0 + c.c2 * c.c2);
  c.c_j = std::max(1.0 / c_beta, c.c2 / c_beta);
  c.d_diam = 2.0 * std::numbers::sqrt2;

  // Second derivative of the reward in p: beta^2 p s'(w) + 2 beta s(w), s = -f.
  constexpr int kGrid = 60;
  double worst_reward_curvature = 0.0;
  for (int ip = 0; ip <= 4 * kGrid; ++ip) {
    const double p = c.c1 + (c.c2 - c.c1) * ip / (4.0 * kGrid);
    for (int ib = 0; ib <= kGrid; ++ib) {
      const double beta = c_beta + (1.0 - c_beta) * ib / kGrid;
      for (int iu = 0; iu <= kGrid; ++iu) {
        const double u = static_cast<double>(iu) / kGrid;
        const double w = beta * p - u;
        const double second = -2.0 * beta * link.density(w) - p * beta * beta * link.density_deriv(w);
        worst_reward_curvature = std::max(worst_reward_curvature, std::abs(second));
      }
    }
  }
  c.c_r = 0.5 * worst_reward_curvature;

  const double t = static_cast<double>(horizon);
  const double schedule = std::pow(d * std::log(t) / t, 0.25);
  c.delta = std::min({schedule, c.j01 / 10.0, 0.1});
  return c;
}

}  // namespace pricing_lab
