#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numeric>
#include <random>
#include <vector>

#include "pricing_lab/environments.hpp"
#include "pricing_lab/policies.hpp"

using namespace pricing_lab;

namespace {

const LinkModel kLink(0.5);
const OnsHyper kTuned{0.25, 64.0};

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

PricingConstants constants(std::int64_t horizon = 1 << 16) { return derive_constants(kLink, 0.3, 2, horizon); }

Eigen::VectorXd random_ball(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v.normalized() * std::pow(unit(rng), 1.0 / d);
}

std::vector<Observation> exploration_data(const EnvSpec& spec, const PricingConstants& c, int n,
                                          std::uint64_t seed) {
  ContextStream xs(spec, seed);
  Rng demand = make_stream(seed, stream::kDemand);
  std::mt19937_64 prices(seed);
  std::uniform_real_distribution<double> uniform(c.c1, c.c2);
  std::vector<Observation> out;
  for (int t = 1; t <= n; ++t) {
    Observation obs;
    obs.x = xs.next(t);
    obs.p = uniform(prices);
    obs.bought = sample_demand(spec, obs.x, obs.p, demand);
    out.push_back(obs);
  }
  return out;
}

}  // namespace

TEST_CASE("PwP prices: forced signs and feasibility") {
  const PricingConstants c = constants();
  PwpPolicy policy(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 1);
  const Eigen::VectorXd x = vec({0.6, 0.8});
  const auto up = policy.price_with_sign(x, 1), down = policy.price_with_sign(x, -1);
  CHECK(up.greedy == down.greedy);
  CHECK(up.greedy == clamped_greedy_price(kLink, c, policy.ons().params, x));
  CHECK(up.price - down.price == doctest::Approx(2.0 * c.delta).epsilon(1e-12));
  CHECK(up.sign == 1);
  CHECK(down.sign == -1);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 100000; ++i) {
    const ParamPair start(random_ball(rng, 2), random_ball(rng, 2));
    PwpPolicy fuzz(kLink, c, kTuned, start, static_cast<std::uint64_t>(i));
    const double p = fuzz.price(random_ball(rng, 2)).price;
    REQUIRE(p >= c.c1);
    REQUIRE(p <= c.c2);
  }
}

TEST_CASE("PwP perturbation moments") {
  const PricingConstants c = constants();
  PwpPolicy policy(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 3);
  const Eigen::VectorXd x = vec({0.6, 0.8});
  const double greedy = policy.price_with_sign(x, 1).greedy;
  REQUIRE(greedy - c.delta > c.c1);
  REQUIRE(greedy + c.delta < c.c2);
  constexpr int kDraws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double p = policy.price(x).price;
    sum += p;
    sum_sq += p * p;
  }
  const double mean = sum / kDraws, second = sum_sq / kDraws;
  CHECK(std::abs(mean - greedy) <= 3.0 * c.delta / std::sqrt(kDraws));
  // p^2 = greedy^2 + delta^2 +/- 2 greedy delta.
  CHECK(std::abs(second - (greedy * greedy + c.delta * c.delta)) <= 3.0 * 2.0 * greedy * c.delta / std::sqrt(kDraws));
}

TEST_CASE("PwP perturbation is uncorrelated with the context") {
  const PricingConstants c = constants();
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  PwpPolicy policy(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 5);
  ContextStream xs(spec, 5);
  constexpr int kDraws = 100000;
  std::vector<double> a(kDraws), s(kDraws);
  for (int i = 0; i < kDraws; ++i) {
    const Eigen::VectorXd x = xs.next(i + 1);
    a[i] = x[0];
    s[i] = policy.price(x).sign;
  }
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / kDraws;
  const double ms = std::accumulate(s.begin(), s.end(), 0.0) / kDraws;
  double cov = 0.0, va = 0.0, vs = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    cov += (a[i] - ma) * (s[i] - ms);
    va += (a[i] - ma) * (a[i] - ma);
    vs += (s[i] - ms) * (s[i] - ms);
  }
  const double corr = cov / std::sqrt(va * vs);
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(kDraws));
  CHECK(std::abs(ms) <= 3.0 / std::sqrt(kDraws));
}

TEST_CASE("PwP updates stay feasible and replay exactly") {
  const PricingConstants c = constants(4096);
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  PwpPolicy a(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 7);
  PwpPolicy b(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 7);
  ContextStream xs(spec, 7);
  Rng demand = make_stream(7, stream::kDemand);
  for (int t = 1; t <= 2000; ++t) {
    Observation obs;
    obs.x = xs.next(t);
    obs.p = a.price(obs.x).price;
    CHECK(b.price(obs.x).price == obs.p);
    obs.bought = sample_demand(spec, obs.x, obs.p, demand);
    a.update(obs);
    b.update(obs);
    REQUIRE(a.estimate().in_unit_balls(1e-12));
    REQUIRE(a.estimate() == b.estimate());
  }
}

TEST_CASE("PwP moves toward the truth on a well-specified stream") {
  const PricingConstants c = constants(8192);
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  const ParamPair start = ParamPair::uniform_direction(2, 0.5);
  const Eigen::VectorXd truth = ParamPair(spec.theta_star, spec.eta_star).combined();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PwpPolicy policy(kLink, c, kTuned, start, seed);
    ContextStream xs(spec, seed);
    Rng demand = make_stream(seed, stream::kDemand);
    for (int t = 1; t <= 8192; ++t) {
      Observation obs;
      obs.x = xs.next(t);
      obs.p = policy.price(obs.x).price;
      obs.bought = sample_demand(spec, obs.x, obs.p, demand);
      policy.update(obs);
    }
    CHECK((policy.estimate().combined() - truth).norm() < (start.combined() - truth).norm());
  }
}

TEST_CASE("gradient fault hook scales the ONS input") {
  const PricingConstants c = constants(4096);
  PwpPolicy clean(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 1);
  PwpPolicy faulty(kLink, c, kTuned, ParamPair::uniform_direction(2, 0.5), 1);
  faulty.set_gradient_fault(-1.0);
  const Observation obs{vec({0.6, 0.8}), 1.0, true};
  clean.update(obs);
  faulty.update(obs);
  CHECK(clean.estimate() != faulty.estimate());
}

TEST_CASE("MLE recovers the truth from exploration data") {
  const PricingConstants c = constants();
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  const std::vector<Observation> data = exploration_data(spec, c, 5000, 1);
  MleOptions options;
  options.record_trace = true;
  const MleResult fit = mle_fit(kLink, data, MleModel::kGlmHeteroscedastic, options);
  CHECK(fit.status != MleStatus::kLineSearchStalled);
  double worst = 0.0;
  for (const Observation& obs : data) {
    worst = std::max(worst, std::abs(obs.x.dot(fit.params.theta - spec.theta_star)));
    worst = std::max(worst, std::abs(obs.x.dot(fit.params.eta - spec.eta_star)));
  }
  CHECK(worst <= 0.1);
  for (std::size_t i = 1; i < fit.trace.size(); ++i) REQUIRE(fit.trace[i] <= fit.trace[i - 1]);
  CHECK(fit.objective == doctest::Approx(mle_objective(kLink, data, MleModel::kGlmHeteroscedastic, fit.params)));

  // Convex objective: the optimum value does not depend on the start.
  std::mt19937_64 rng(3);
  for (int s = 0; s < 5; ++s) {
    MleOptions other;
    other.initial = ParamPair(random_ball(rng, 2), random_ball(rng, 2));
    const MleResult alt = mle_fit(kLink, data, MleModel::kGlmHeteroscedastic, other);
    CHECK(std::abs(alt.objective - fit.objective) <= 1e-4);
  }
}

TEST_CASE("MLE variants") {
  const PricingConstants c = constants();
  EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                               std::nullopt, 0);
  const std::vector<Observation> data = exploration_data(spec, c, 800, 2);
  const MleResult homo = mle_fit(kLink, data, MleModel::kGlmHomoscedastic);
  CHECK(homo.params.eta == homoscedastic_eta(2));
  CHECK(homoscedastic_eta(2).norm() == doctest::Approx(1.0));
  CHECK(homo.params.in_unit_balls(1e-12));

  spec.demand_kind = DemandKind::kMisspecifiedValuation;
  const std::vector<Observation> val = exploration_data(spec, c, 800, 3);
  MleOptions options;
  options.starts = 8;
  options.record_trace = true;
  const MleResult fit = mle_fit(kLink, val, MleModel::kValuationHeteroscedastic, options);
  CHECK(fit.params.in_unit_balls(1e-12));
  for (std::size_t i = 1; i < fit.trace.size(); ++i) REQUIRE(fit.trace[i] <= fit.trace[i - 1]);
  options.starts = 1;
  CHECK(fit.objective <= mle_fit(kLink, val, MleModel::kValuationHeteroscedastic, options).objective + 1e-12);

  CHECK_THROWS_AS(mle_fit(kLink, std::vector<Observation>{}, MleModel::kGlmHeteroscedastic),
                  std::invalid_argument);
}

TEST_CASE("RMLP-2 schedule") {
  const PricingConstants c = constants(4096);
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  Rmlp2Policy policy(kLink, c, Rmlp2Variant::kModifiedHeteroscedastic, ParamPair::uniform_direction(2, 0.5), 1);
  CHECK(policy.epoch_index() == 0);
  ContextStream xs(spec, 1);
  Rng demand = make_stream(1, stream::kDemand);
  std::vector<std::int64_t> explored;
  for (std::int64_t t = 1; t <= 300; ++t) {
    Observation obs;
    obs.x = xs.next(t);
    const ParamPair before = policy.current_fit();
    const double expected_exploit = policy.exploit_price(obs.x);
    obs.p = policy.price(obs.x);
    obs.bought = sample_demand(spec, obs.x, obs.p, demand);
    policy.update(obs);
    if (policy.last_round_explored()) {
      explored.push_back(t);
      CHECK(obs.p >= c.c1);
      CHECK(obs.p <= c.c2);
    } else {
      CHECK(obs.p == expected_exploit);
      CHECK(policy.current_fit() == before);
    }
    const std::int64_t k = policy.epoch_index();
    CHECK(k * (k + 1) / 2 <= t);
    CHECK((k + 1) * (k + 2) / 2 > t);
  }
  REQUIRE(explored.size() >= 4);
  CHECK(explored[0] == 1);
  CHECK(explored[1] == 3);
  CHECK(explored[2] == 6);
  CHECK(explored[3] == 10);
  for (std::int64_t t : explored) CHECK(is_triangular(t));
  CHECK(explored.size() == 24);  // 24 * 25 / 2 = 300
  CHECK(policy.exploration_history().size() == explored.size());
  CHECK(policy.diagnostics().refits == explored.size());
}

TEST_CASE("RMLP-2 exploration prices are uniform") {
  const PricingConstants c = constants();
  constexpr int kDraws = 10000;
  std::vector<double> prices;
  for (int i = 0; i < kDraws; ++i) {
    Rmlp2Policy policy(kLink, c, Rmlp2Variant::kModifiedHeteroscedastic, ParamPair::uniform_direction(2, 0.5),
                       static_cast<std::uint64_t>(i));
    prices.push_back(policy.price(vec({0.6, 0.8})));
  }
  std::sort(prices.begin(), prices.end());
  double ks = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double cdf = (prices[i] - c.c1) / (c.c2 - c.c1);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / kDraws), std::abs(cdf - static_cast<double>(i + 1) / kDraws)});
  }
  // Asymptotic Kolmogorov critical value at level 0.01.
  CHECK(ks <= 1.6276 / std::sqrt(static_cast<double>(kDraws)));
}

TEST_CASE("RMLP-2 cannot learn the second coordinate under the adversarial stream") {
  const PricingConstants c = constants(4096);
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kAdversarialTriangular, DemandKind::kGlm,
                                     std::nullopt, 0);
  const ParamPair start = ParamPair::uniform_direction(2, 0.5);
  for (auto variant : {Rmlp2Variant::kModifiedHeteroscedastic, Rmlp2Variant::kOriginalHomoscedastic}) {
    Rmlp2Policy policy(kLink, c, variant, start, 2);
    const ParamPair initial = policy.current_fit();
    ContextStream xs(spec, 2);
    Rng demand = make_stream(2, stream::kDemand);
    for (std::int64_t t = 1; t <= 2000; ++t) {
      Observation obs;
      obs.x = xs.next(t);
      obs.p = policy.price(obs.x);
      obs.bought = sample_demand(spec, obs.x, obs.p, demand);
      policy.update(obs);
    }
    for (const Observation& obs : policy.exploration_history()) CHECK(obs.x == vec({1.0, 0.0}));
    CHECK(std::abs(policy.current_fit().theta[1] - initial.theta[1]) <= 1e-12);
    CHECK(std::abs(policy.current_fit().eta[1] - initial.eta[1]) <= 1e-12);
    CHECK(policy.current_fit().theta[0] != initial.theta[0]);
  }
}

TEST_CASE("reference policies") {
  const EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                     std::nullopt, 0);
  OraclePolicy oracle(kLink, spec);
  const Eigen::VectorXd x = vec({0.6, 0.8});
  CHECK(oracle.propose(x) == greedy_price(kLink, x.dot(spec.theta_star), x.dot(spec.eta_star)));
  ConstantPricePolicy constant(1.5, 2);
  CHECK(constant.propose(x) == 1.5);
  CHECK(constant.estimate().dim() == 2);
}
