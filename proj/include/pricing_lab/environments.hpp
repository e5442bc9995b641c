#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pricing_lab {

using Rng = std::mt19937_64;

/// Independent, reproducible random stream for (seed, tag).
Rng make_stream(std::uint64_t seed, std::uint64_t tag);

/// Stream tags. Separate streams keep the context and demand noise shared
/// across policies run under the same trial seed.
namespace stream {
inline constexpr std::uint64_t kGroundTruth = 1;
inline constexpr std::uint64_t kCovariance = 2;
inline constexpr std::uint64_t kContext = 3;
inline constexpr std::uint64_t kDemand = 4;
inline constexpr std::uint64_t kPerturbation = 5;
inline constexpr std::uint64_t kExploration = 6;
inline constexpr std::uint64_t kRestarts = 7;
}  // namespace stream

enum class ContextKind { kStochasticGaussian, kAdversarialTriangular };
enum class DemandKind { kGlm, kValuation, kMisspecifiedValuation };

std::string to_string(ContextKind kind);
std::string to_string(DemandKind kind);
ContextKind parse_context_kind(const std::string& name);
DemandKind parse_demand_kind(const std::string& name);

struct Expansion {
  Eigen::VectorXd x0;
  std::vector<int> powers;
};

struct EnvSpec {
  int d = 2;
  Eigen::VectorXd theta_star;
  Eigen::VectorXd eta_star;
  ContextKind context_kind = ContextKind::kStochasticGaussian;
  DemandKind demand_kind = DemandKind::kGlm;
  double sigma = 0.5;
  Eigen::VectorXd mu_x;
  Eigen::MatrixXd cov_x;
  std::optional<Expansion> expansion;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Eigen::VectorXd theta_star;
  Eigen::VectorXd eta_star;
};

/// Entries uniform on [0.3, 1], each vector rescaled to norm 0.9, resampled
/// until every basis vector satisfies e_i'eta* >= c_beta.
GroundTruth gen_ground_truth(int d, double c_beta, std::uint64_t seed);

/// Q diag(lambda) Q' with Q a seeded random rotation and lambda_i ~ U[0.5, 2].
Eigen::MatrixXd random_covariance(int d, std::uint64_t seed);

/// Builds a fully materialized environment (ground truth, mu_x = 10 * ones, Sigma_x).
EnvSpec make_env_spec(int d, double c_beta, double sigma, ContextKind context_kind,
                      DemandKind demand_kind, std::optional<Expansion> expansion,
                      std::uint64_t seed);

bool is_triangular(std::int64_t t);

/// [1, 0] on triangular rounds, [0, 1] otherwise. Requires d = 2 and t >= 1.
Eigen::VectorXd adversarial_context(int d, std::int64_t t);

/// z ~ N(mu_x, Sigma_x), returned as z / ||z||.
Eigen::VectorXd stochastic_context(const EnvSpec& spec, Rng& rng);

/// Per-trial context generator.
class ContextStream {
 public:
  ContextStream(const EnvSpec& spec, std::uint64_t trial_seed);
  Eigen::VectorXd next(std::int64_t t);

 private:
  const EnvSpec* spec_;
  Rng rng_;
  Eigen::MatrixXd chol_;
};

/// Purchase decision for price p at context x under the environment's demand kind.
bool sample_demand(const EnvSpec& spec, const Eigen::VectorXd& x, double p, Rng& rng);

/// (u, beta) such that the true purchase probability is S(beta p - u).
struct TrueIndex {
  double u = 0.0;
  double beta = 1.0;
};
TrueIndex true_index(const EnvSpec& spec, const Eigen::VectorXd& x);

/// [x; (x-x0)^a_1; ...; (x-x0)^a_m] / sqrt(m+1), then scaled onto the unit
/// sphere if its norm still exceeds one.
Eigen::VectorXd expand_context(const Eigen::VectorXd& x, const Eigen::VectorXd& x0,
                               const std::vector<int>& powers);

}  // namespace pricing_lab
