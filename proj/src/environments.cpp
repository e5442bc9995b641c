#include "pricing_lab/environments.hpp"

#include <cmath>
#include <stdexcept>

#include "pricing_lab/link_math.hpp"

namespace pricing_lab {

Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

std::string to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::kStochasticGaussian:
      return "stochastic-gaussian";
    case ContextKind::kAdversarialTriangular:
      return "adversarial-triangular";
  }
  return "unknown";
}

std::string to_string(DemandKind kind) {
  switch (kind) {
    case DemandKind::kGlm:
      return "glm";
    case DemandKind::kValuation:
      return "valuation";
    case DemandKind::kMisspecifiedValuation:
      return "misspecified-valuation";
  }
  return "unknown";
}

ContextKind parse_context_kind(const std::string& name) {
  if (name == "stochastic-gaussian") return ContextKind::kStochasticGaussian;
  if (name == "adversarial-triangular") return ContextKind::kAdversarialTriangular;
  throw std::invalid_argument("unknown context kind '" + name + "'");
}

DemandKind parse_demand_kind(const std::string& name) {
  if (name == "glm") return DemandKind::kGlm;
  if (name == "valuation") return DemandKind::kValuation;
  if (name == "misspecified-valuation") return DemandKind::kMisspecifiedValuation;
  throw std::invalid_argument("unknown demand kind '" + name + "'");
}

GroundTruth gen_ground_truth(int d, double c_beta, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("gen_ground_truth: d must be >= 1");
  Rng rng = make_stream(seed, stream::kGroundTruth);
  std::uniform_real_distribution<double> entry(0.3, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::VectorXd theta(d), eta(d);
    for (int i = 0; i < d; ++i) theta[i] = entry(rng);
    for (int i = 0; i < d; ++i) eta[i] = entry(rng);
    theta *= 0.9 / theta.norm();
    eta *= 0.9 / eta.norm();
    if (eta.minCoeff() >= c_beta && theta.minCoeff() > 0.0) return {theta, eta};
  }
  throw std::runtime_error("gen_ground_truth: rejection budget of 1000 draws exhausted");
}

Eigen::MatrixXd random_covariance(int d, std::uint64_t seed) {
  Rng rng = make_stream(seed, stream::kCovariance);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> eig(0.5, 2.0);
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd lambda(d);
  for (int i = 0; i < d; ++i) lambda[i] = eig(rng);
  Eigen::MatrixXd cov = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (cov + cov.transpose());
}

EnvSpec make_env_spec(int d, double c_beta, double sigma, ContextKind context_kind,
                      DemandKind demand_kind, std::optional<Expansion> expansion,
                      std::uint64_t seed) {
  if (context_kind == ContextKind::kAdversarialTriangular && d != 2) {
    throw std::invalid_argument("adversarial contexts are defined for d = 2 only");
  }
  EnvSpec spec;
  spec.d = d;
  GroundTruth truth = gen_ground_truth(d, c_beta, seed);
  spec.theta_star = std::move(truth.theta_star);
  spec.eta_star = std::move(truth.eta_star);
  spec.context_kind = context_kind;
  spec.demand_kind = demand_kind;
  spec.sigma = sigma;
  spec.mu_x = Eigen::VectorXd::Constant(d, 10.0);
  spec.cov_x = random_covariance(d, seed);
  spec.expansion = std::move(expansion);
  spec.seed = seed;
  return spec;
}

bool is_triangular(std::int64_t t) {
  if (t < 1) return false;
  // t = k(k+1)/2  <=>  8t + 1 is a perfect square.
  const auto disc = static_cast<std::int64_t>(8 * t + 1);
  auto root = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(disc))));
  while (root * root > disc) --root;
  while ((root + 1) * (root + 1) <= disc) ++root;
  return root * root == disc;
}

Eigen::VectorXd adversarial_context(int d, std::int64_t t) {
  if (d != 2) throw std::invalid_argument("adversarial_context: defined for d = 2 only");
  if (t < 1) throw std::invalid_argument("adversarial_context: rounds start at t = 1");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  x[is_triangular(t) ? 0 : 1] = 1.0;
  return x;
}

namespace {

Eigen::VectorXd draw_normalized(const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Eigen::VectorXd n(mu.size());
    for (Eigen::Index i = 0; i < n.size(); ++i) n[i] = normal(rng);
    const Eigen::VectorXd z = mu + chol * n;
    const double norm = z.norm();
    if (norm > 0.0) return z / norm;
  }
}

}  // namespace

Eigen::VectorXd stochastic_context(const EnvSpec& spec, Rng& rng) {
  const Eigen::MatrixXd chol = spec.cov_x.llt().matrixL();
  return draw_normalized(spec.mu_x, chol, rng);
}

ContextStream::ContextStream(const EnvSpec& spec, std::uint64_t trial_seed)
    : spec_(&spec), rng_(make_stream(trial_seed, stream::kContext)) {
  if (spec.context_kind == ContextKind::kStochasticGaussian) {
    Eigen::LLT<Eigen::MatrixXd> llt(spec.cov_x);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("cov_x is not SPD");
    chol_ = llt.matrixL();
  }
}

Eigen::VectorXd ContextStream::next(std::int64_t t) {
  if (spec_->context_kind == ContextKind::kAdversarialTriangular) {
    return adversarial_context(spec_->d, t);
  }
  return draw_normalized(spec_->mu_x, chol_, rng_);
}

bool sample_demand(const EnvSpec& spec, const Eigen::VectorXd& x, double p, Rng& rng) {
  const double u = x.dot(spec.theta_star);
  const double beta = x.dot(spec.eta_star);
  switch (spec.demand_kind) {
    case DemandKind::kGlm: {
      const LinkModel link(spec.sigma);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      return unit(rng) < link.survival(beta * p - u);
    }
    case DemandKind::kValuation: {
      if (!(beta > 0.0)) throw std::invalid_argument("sample_demand: x'eta* must be positive");
      std::normal_distribution<double> noise(0.0, spec.sigma);
      return p <= (u + noise(rng)) / beta;
    }
    case DemandKind::kMisspecifiedValuation: {
      if (!(beta > 0.0)) throw std::invalid_argument("sample_demand: x'eta* must be positive");
      std::normal_distribution<double> noise(0.0, spec.sigma);
      return p <= u + beta * noise(rng);
    }
  }
  return false;
}

TrueIndex true_index(const EnvSpec& spec, const Eigen::VectorXd& x) {
  const double u = x.dot(spec.theta_star);
  const double beta = x.dot(spec.eta_star);
  if (spec.demand_kind == DemandKind::kMisspecifiedValuation) {
    // P(u + beta N >= p) = S(p / beta - u / beta).
    if (!(beta > 0.0)) throw std::invalid_argument("true_index: x'eta* must be positive");
    return {u / beta, 1.0 / beta};
  }
  return {u, beta};
}

Eigen::VectorXd expand_context(const Eigen::VectorXd& x, const Eigen::VectorXd& x0,
                               const std::vector<int>& powers) {
  if (x.size() != x0.size()) throw std::invalid_argument("expand_context: x and x0 differ in size");
  if (powers.empty()) throw std::invalid_argument("expand_context: power list is empty");
  const Eigen::Index d = x.size();
  const Eigen::VectorXd shifted = x - x0;
  Eigen::VectorXd out(d * static_cast<Eigen::Index>(powers.size() + 1));
  out.head(d) = x;
  for (std::size_t j = 0; j < powers.size(); ++j) {
    const int a = powers[j];
    for (Eigen::Index i = 0; i < d; ++i) {
      if (a < 0 && shifted[i] == 0.0) {
        throw std::invalid_argument("expand_context: negative power of a zero coordinate");
      }
      out[d * static_cast<Eigen::Index>(j + 1) + i] = std::pow(shifted[i], a);
    }
  }
  out /= std::sqrt(static_cast<double>(powers.size() + 1));
  const double norm = out.norm();
  if (norm > 1.0) out /= norm;
  return out;
}

}  // namespace pricing_lab
