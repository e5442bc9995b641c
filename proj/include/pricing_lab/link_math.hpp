#pragma once

#include <cstdint>

namespace pricing_lab {

enum class LinkKind { kGaussianSurvival };

/// Purchase-probability link S(w) = P(N >= w) for valuation noise N.
///
/// The only kind implemented is the Gaussian survival function
/// S(w) = 1 - Phi(w / sigma). Sign convention: s = S' < 0 and the noise
/// density is f = -s > 0. All tail quantities are evaluated through the
/// hazard rate so they stay finite far into either tail.
class LinkModel {
 public:
  explicit LinkModel(double sigma = 0.5, LinkKind kind = LinkKind::kGaussianSurvival);

  double sigma() const { return sigma_; }
  LinkKind kind() const { return kind_; }

  /// S(w), in [0, 1]. Throws std::invalid_argument on non-finite w.
  double survival(double w) const;
  /// F(w) = 1 - S(w).
  double cdf(double w) const;
  /// f(w) = -S'(w) > 0.
  double density(double w) const;
  /// f'(w).
  double density_deriv(double w) const;

  /// f(w) / S(w) = -s/S, stable for large w.
  double hazard(double w) const;
  /// f(w) / (1 - S(w)) = -s/(1-S), stable for very negative w.
  double reverse_hazard(double w) const;

  struct SurvivalHazard {
    double survival;
    double hazard;
  };
  /// survival(w) and hazard(w) sharing one erfc evaluation.
  SurvivalHazard survival_and_hazard(double w) const;

  /// d^2 log S / dw^2 (strictly negative).
  double log_survival_curvature(double w) const;
  /// d^2 log(1 - S) / dw^2 (strictly negative).
  double log_cdf_curvature(double w) const;

 private:
  double sigma_;
  LinkKind kind_;
};

/// Standard normal hazard pdf(z) / (1 - Phi(z)), accurate in both tails.
double normal_hazard(double z);

/// phi(w) = S(w)/f(w) - w, the virtual-valuation map. Strictly decreasing.
/// Throws std::domain_error when f(w) underflows.
double varphi(const LinkModel& link, double w);

/// Inverse of varphi by bracketing and bisection; |varphi(w) - u| <= 1e-10.
/// Throws std::domain_error if no bracket exists within |w| <= 50 sigma.
double varphi_inv(const LinkModel& link, double u);

/// J(u, beta) = (u + varphi_inv(u)) / beta, the revenue-maximizing price.
double greedy_price(const LinkModel& link, double u, double beta);

/// r(u, beta, p) = p * S(beta * p - u).
double expected_reward(const LinkModel& link, double u, double beta, double p);

/// r(u*, beta*, J(u*, beta*)) - r(u*, beta*, p), never negative.
double instant_regret(const LinkModel& link, double u_star, double beta_star, double p);

/// Price elasticity of expected demand, beta * s(w)/S(w) * p with w = beta*p - u.
double elasticity(const LinkModel& link, double u, double beta, double p);

struct PricingConstants {
  double c_beta = 0.0;
  double j01 = 0.0;       // J(0, 1)
  double c1 = 0.0;        // lower price bound, J(0,1)/2
  double c2 = 0.0;        // upper price bound, 2 J(1, c_beta)
  double c_l = 0.0;       // curvature lower bound of the log-likelihood
  double c_g = 0.0;       // gradient scale bound
  double c_e = 0.0;       // exp-concavity, c_l / c_g^2
  double c_j = 0.0;       // Lipschitz constant of J
  double c_r = 0.0;       // regret smoothness, Reg <= c_r (p - p*)^2
  double g_bound = 0.0;   // c_g * sqrt(1 + c2^2)
  double d_diam = 0.0;    // diameter of the parameter set
  double delta = 0.0;     // price perturbation magnitude
  int d = 0;
  std::int64_t horizon = 0;
};

/// Computes price bounds, curvature/gradient constants (dense grid over
/// w in [-1, c2], step 1e-3) and the perturbation size for horizon T.
PricingConstants derive_constants(const LinkModel& link, double c_beta, int d, std::int64_t horizon);

}  // namespace pricing_lab
