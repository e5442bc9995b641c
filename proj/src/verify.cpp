#include "pricing_lab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "pricing_lab/environments.hpp"
#include "pricing_lab/likelihood.hpp"
#include "pricing_lab/link_math.hpp"
#include "pricing_lab/ons.hpp"
#include "pricing_lab/policies.hpp"

namespace pricing_lab {
namespace {

constexpr double kSigma = 0.5;
constexpr double kCBeta = 0.3;
constexpr std::int64_t kHorizon = 1 << 16;

std::string format(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random vector with nonnegative entries and norm in [lo, hi].
Eigen::VectorXd positive_vector(Rng& rng, int d, double lo, double hi) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = uniform(rng, 0.05, 1.0);
  return v.normalized() * uniform(rng, lo, hi);
}

// Feasible parameters and observation: w stays in [-1, c2].
struct Sample {
  ParamPair params;
  Observation obs;
};

Sample feasible_sample(Rng& rng, int d, const PricingConstants& c) {
  Sample s;
  s.params = ParamPair(positive_vector(rng, d, 0.0, 1.0), positive_vector(rng, d, 0.0, 1.0));
  s.obs.x = positive_vector(rng, d, 1.0, 1.0);
  s.obs.p = uniform(rng, c.c1, c.c2);
  s.obs.bought = (rng() & 1) != 0;
  return s;
}

PropertyResult gradient_check(const LinkModel& link, const PricingConstants& c, Rng& rng,
                              double fault) {
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    // The probability floor flattens nll far in the tail; sample away from it.
    Sample s = feasible_sample(rng, 2, c);
    for (std::size_t clamps = 1; clamps > 0;) {
      clamps = 0;
      nll(link, s.params, s.obs, &clamps);
      if (clamps > 0) s = feasible_sample(rng, 2, c);
    }
    const Eigen::VectorXd z = s.params.combined();
    const Eigen::VectorXd g = fault * nll_grad(link, s.params, s.obs);
    Eigen::VectorXd fd(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double h = 1e-6;
      Eigen::VectorXd up = z, down = z;
      up[i] += h;
      down[i] -= h;
      fd[i] = (nll(link, ParamPair::from_combined(up), s.obs) -
               nll(link, ParamPair::from_combined(down), s.obs)) / (2.0 * h);
    }
    worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-12));
  }
  return {"gradient_vs_finite_differences", worst <= 1e-5,
          format("max relative error %.3g over 50 points (limit 1e-5)", worst)};
}

PropertyResult woodbury_check(const PricingConstants& c, Rng& rng) {
  OnsState state = ons_init(OnsHyper{1.0, 1.0}, 2, ParamPair::uniform_direction(2, 0.5));
  double worst = 0.0;
  for (int n = 1; n <= 2000; ++n) {
    Eigen::VectorXd g(4);
    for (Eigen::Index i = 0; i < 4; ++i) g[i] = uniform(rng, -1.0, 1.0);
    g *= c.g_bound * uniform(rng, 0.0, 1.0) / g.norm();
    state = woodbury_update(std::move(state), g);
    if (n % 50 == 0) {
      const Eigen::MatrixXd direct = state.a_matrix.inverse();
      worst = std::max(worst, (state.a_inverse - direct).cwiseAbs().maxCoeff());
    }
  }
  return {"woodbury_vs_direct_inverse", worst <= 1e-8,
          format("max entry error %.3g after 2000 updates (limit 1e-8)", worst)};
}

// Exact minimizer over the eta disk for fixed theta, via the KKT multiplier.
Eigen::Vector2d eta_subproblem(const Eigen::Matrix4d& a, const Eigen::Vector4d& point,
                               const Eigen::Vector2d& theta) {
  const Eigen::Matrix2d a21 = a.block<2, 2>(2, 0);
  const Eigen::Matrix2d a22 = a.block<2, 2>(2, 2);
  const Eigen::Vector2d free = point.tail<2>() - a22.ldlt().solve(a21 * (theta - point.head<2>()));
  if (free.norm() <= 1.0) return free;
  const Eigen::Vector2d rhs = a22 * free;
  auto eta_at = [&](double mu) {
    return Eigen::Vector2d((a22 + mu * Eigen::Matrix2d::Identity()).ldlt().solve(rhs));
  };
  double lo = 0.0, hi = 1.0;
  while (eta_at(hi).norm() > 1.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eta_at(mid).norm() > 1.0 ? lo : hi) = mid;
  }
  return eta_at(hi);
}

double quad(const Eigen::Matrix4d& a, const Eigen::Vector4d& point, const Eigen::Vector2d& theta,
            const Eigen::Vector2d& eta) {
  Eigen::Vector4d z;
  z << theta, eta;
  return (z - point).dot(a * (z - point));
}

double grid_oracle(const Eigen::Matrix4d& a, const Eigen::Vector4d& point) {
  auto value = [&](const Eigen::Vector2d& theta) {
    return quad(a, point, theta, eta_subproblem(a, point, theta));
  };
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d arg = Eigen::Vector2d::Zero();
  auto scan = [&](const Eigen::Vector2d& center, double half, double step) {
    for (double u = center[0] - half; u <= center[0] + half + 1e-12; u += step) {
      for (double v = center[1] - half; v <= center[1] + half + 1e-12; v += step) {
        Eigen::Vector2d theta(u, v);
        if (theta.norm() > 1.0) theta /= theta.norm();
        const double f = value(theta);
        if (f < best) {
          best = f;
          arg = theta;
        }
      }
    }
  };
  scan(Eigen::Vector2d::Zero(), 1.0, 1e-2);
  scan(arg, 2e-2, 1e-3);
  scan(arg, 2e-3, 1e-4);
  return best;
}

PropertyResult projection_check(const PricingConstants& c, Rng& rng) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < 6; ++n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    for (int k = 0; k < 40; ++k) {
      Eigen::VectorXd g(4);
      for (Eigen::Index i = 0; i < 4; ++i) g[i] = uniform(rng, -1.0, 1.0);
      a += c.g_bound * g * g.transpose();
    }
    Eigen::Vector4d point;
    for (Eigen::Index i = 0; i < 4; ++i) point[i] = uniform(rng, -1.0, 1.0);
    point.head<2>() *= uniform(rng, 1.2, 3.0) / point.head<2>().norm();
    point.tail<2>() *= uniform(rng, 0.3, 3.0) / point.tail<2>().norm();
    const ProjectionResult proj = a_norm_project(a, point);
    const Eigen::Vector4d z = proj.params.combined();
    const double pgd = (z - point).dot(a * (z - point));
    worst = std::max(worst, pgd - grid_oracle(a, point));
  }
  return {"projection_vs_grid_oracle", worst <= 1e-3,
          format("max objective gap %.3g over 6 instances (limit 1e-3)", worst)};
}

PropertyResult perturbation_check(const LinkModel& link, const PricingConstants& c, Rng& rng,
                                  std::uint64_t seed) {
  const GroundTruth truth = gen_ground_truth(2, c.c_beta, seed);
  const ParamPair params(truth.theta_star, truth.eta_star);
  Eigen::VectorXd x = positive_vector(rng, 2, 1.0, 1.0);
  PwpPolicy policy(link, c, hyperparameters_for_gamma(0.5, c.d_diam), params, seed);
  const double greedy = policy.price_with_sign(x, 1).greedy;
  if (greedy - c.delta < c.c1 || greedy + c.delta > c.c2) {
    return {"perturbation_moments", false, "greedy price too close to the price bounds"};
  }
  constexpr int kDraws = 100000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double p = policy.price(x).price;
    s1 += p;
    s2 += p * p;
    s4 += p * p * p * p;
  }
  const double n = kDraws;
  const double m1 = s1 / n, m2 = s2 / n;
  const double se1 = std::sqrt((m2 - m1 * m1) / n);
  const double se2 = std::sqrt((s4 / n - m2 * m2) / n);
  const double z1 = std::abs(m1 - greedy) / se1;
  const double z2 = std::abs(m2 - (greedy * greedy + c.delta * c.delta)) / se2;
  return {"perturbation_moments", z1 <= 3.0 && z2 <= 3.0,
          format("first moment %.2f SE, second moment %.2f SE (limit 3)", z1, z2)};
}

PropertyResult demand_equivalence_check(const LinkModel& link, const PricingConstants& c,
                                        std::uint64_t seed) {
  EnvSpec glm = make_env_spec(2, c.c_beta, link.sigma(), ContextKind::kStochasticGaussian,
                              DemandKind::kGlm, std::nullopt, seed);
  EnvSpec valuation = glm;
  valuation.demand_kind = DemandKind::kValuation;
  Rng contexts = make_stream(seed, 101);
  Rng a = make_stream(seed, 102);
  Rng b = make_stream(seed, 103);
  constexpr int kPoints = 5;
  constexpr int kDraws = 100000;
  double statistic = 0.0;
  for (int k = 0; k < kPoints; ++k) {
    const Eigen::VectorXd x = stochastic_context(glm, contexts);
    const double p = c.c1 + (c.c2 - c.c1) * (k + 0.5) / kPoints * 0.5;
    double buys_a = 0.0, buys_b = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      buys_a += sample_demand(glm, x, p, a);
      buys_b += sample_demand(valuation, x, p, b);
    }
    // 2x2 homogeneity statistic.
    const double pooled = (buys_a + buys_b) / (2.0 * kDraws);
    if (pooled <= 0.0 || pooled >= 1.0) continue;
    const double diff = (buys_a - buys_b) / kDraws;
    statistic += diff * diff / (pooled * (1.0 - pooled) * 2.0 / kDraws);
  }
  const boost::math::chi_squared dist(kPoints);
  const double critical = boost::math::quantile(dist, 0.99);
  return {"demand_equivalence_chi_square", statistic <= critical,
          format("statistic %.3f vs critical %.3f (5 dof, level 0.01)", statistic, critical)};
}

PropertyResult varphi_check(const LinkModel& link) {
  double worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double u = -0.5 + 2.5 * i / 400.0;
    worst = std::max(worst, std::abs(varphi(link, varphi_inv(link, u)) - u));
  }
  return {"varphi_round_trip", worst <= 1e-9,
          format("max |varphi(varphi_inv(u)) - u| = %.3g over u in [-0.5, 2] (limit 1e-9)", worst)};
}

PropertyResult certificate_check(const LinkModel& link, const PricingConstants& c, Rng& rng) {
  double worst_exp = std::numeric_limits<double>::infinity();
  double worst_curv = std::numeric_limits<double>::infinity();
  double worst_grad = 0.0;
  for (int n = 0; n < 200; ++n) {
    const Sample s = feasible_sample(rng, 2, c);
    const Eigen::MatrixXd h = nll_hessian(link, s.params, s.obs);
    const Eigen::VectorXd g = nll_grad(link, s.params, s.obs);
    Eigen::VectorXd v(4);
    v << -s.obs.x, s.obs.p * s.obs.x;
    const Eigen::MatrixXd exp_gap = h - c.c_e * g * g.transpose();
    const Eigen::MatrixXd curv_gap = h - c.c_l * v * v.transpose();
    worst_exp = std::min(worst_exp, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(exp_gap).eigenvalues().minCoeff());
    worst_curv = std::min(worst_curv, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(curv_gap).eigenvalues().minCoeff());
    worst_grad = std::max(worst_grad, g.norm() / c.g_bound);
  }
  const bool ok = worst_exp >= -1e-8 && worst_curv >= -1e-8 && worst_grad <= 1.0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "min eigenvalue %.3g (exp-concavity), %.3g (curvature); max |grad|/G %.3f", worst_exp,
                worst_curv, worst_grad);
  return {"exp_concavity_and_curvature_certificates", ok, buf};
}

PropertyResult zero_mean_gradient_check(const LinkModel& link, const PricingConstants& c,
                                        std::uint64_t seed) {
  EnvSpec spec = make_env_spec(2, c.c_beta, link.sigma(), ContextKind::kStochasticGaussian,
                               DemandKind::kGlm, std::nullopt, seed);
  const ParamPair truth(spec.theta_star, spec.eta_star);
  Rng contexts = make_stream(seed, 201);
  Rng demand = make_stream(seed, 202);
  constexpr int kDraws = 100000;
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    Observation obs;
    obs.x = stochastic_context(spec, contexts);
    obs.p = c.c1 + (c.c2 - c.c1) * (k + 1) / 8.0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < kDraws; ++i) {
      obs.bought = sample_demand(spec, obs.x, obs.p, demand);
      const Eigen::VectorXd g = nll_grad(link, truth, obs);
      sum += g;
      sum_sq += g.cwiseProduct(g);
    }
    const Eigen::VectorXd mean = sum / kDraws;
    const double variance = (sum_sq / kDraws - mean.cwiseProduct(mean)).sum();
    worst = std::max(worst, mean.norm() / std::sqrt(variance / kDraws));
  }
  return {"zero_mean_gradient_at_truth", worst <= 3.0,
          format("max |mean gradient| = %.2f MC standard errors (limit 3)", worst)};
}

}  // namespace

std::vector<PropertyResult> run_verify(const VerifyOptions& options) {
  const LinkModel link(kSigma);
  const PricingConstants c = derive_constants(link, kCBeta, 2, kHorizon);
  const std::uint64_t seed = options.seed;
  const std::vector<std::pair<const char*, std::function<PropertyResult()>>> checks = {
      {"gradient_vs_finite_differences",
       [&] {
         Rng rng = make_stream(seed, 11);
         return gradient_check(link, c, rng, options.gradient_fault);
       }},
      {"woodbury_vs_direct_inverse",
       [&] {
         Rng rng = make_stream(seed, 12);
         return woodbury_check(c, rng);
       }},
      {"projection_vs_grid_oracle",
       [&] {
         Rng rng = make_stream(seed, 13);
         return projection_check(c, rng);
       }},
      {"perturbation_moments",
       [&] {
         Rng rng = make_stream(seed, 14);
         return perturbation_check(link, c, rng, seed);
       }},
      {"demand_equivalence_chi_square", [&] { return demand_equivalence_check(link, c, seed); }},
      {"varphi_round_trip", [&] { return varphi_check(link); }},
      {"exp_concavity_and_curvature_certificates",
       [&] {
         Rng rng = make_stream(seed, 17);
         return certificate_check(link, c, rng);
       }},
      {"zero_mean_gradient_at_truth", [&] { return zero_mean_gradient_check(link, c, seed); }},
  };
  std::vector<PropertyResult> results;
  for (const auto& [name, check] : checks) {
    try {
      results.push_back(check());
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("error: ") + e.what()});
    }
  }
  return results;
}

}  // namespace pricing_lab
