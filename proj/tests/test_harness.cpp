#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "pricing_lab/harness.hpp"

using namespace pricing_lab;

namespace {

const LinkModel kLink(0.5);

EnvSpec stochastic_env() {
  return make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm, std::nullopt, 0);
}

TrialOptions tuned() {
  TrialOptions options;
  options.policy.ons_gamma = 0.25;
  options.policy.ons_epsilon = 64.0;
  return options;
}

// Independent least-squares fit through Eigen's QR.
double qr_slope(const std::vector<std::int64_t>& rounds, const std::vector<double>& values) {
  std::vector<std::pair<double, double>> kept;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i] * 64 >= rounds.back()) kept.emplace_back(std::log2(rounds[i]), std::log2(values[i]));
  }
  Eigen::MatrixXd a(kept.size(), 2);
  Eigen::VectorXd b(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = kept[i].first;
    b[i] = kept[i].second;
  }
  return a.colPivHouseholderQr().solve(b)[1];
}

}  // namespace

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::kPwp, PolicyKind::kRmlp2Modified, PolicyKind::kRmlp2Homoscedastic,
                 PolicyKind::kRmlp2Valuation, PolicyKind::kOracle, PolicyKind::kConstant}) {
    CHECK(parse_policy_kind(to_string(k)) == k);
  }
  CHECK(to_string(PolicyKind::kPwp) == "pwp");
  CHECK(to_string(PolicyKind::kRmlp2Modified) == "rmlp2-modified");
  CHECK_THROWS_AS(parse_policy_kind("rmlp"), std::invalid_argument);
}

TEST_CASE("checkpoint grid") {
  const std::vector<std::int64_t> grid = checkpoint_grid(1 << 16);
  CHECK(grid.front() == 16);
  CHECK(grid.back() == 65536);
  CHECK(grid.size() <= 65);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  CHECK(checkpoint_grid(10) == std::vector<std::int64_t>{10});
  CHECK(checkpoint_grid(20).back() == 20);
  CHECK_THROWS(checkpoint_grid(0));
}

TEST_CASE("log-log slope") {
  const std::vector<std::int64_t> grid = checkpoint_grid(1 << 16);
  std::vector<double> linear, root, root_log;
  for (std::int64_t t : grid) {
    const double x = static_cast<double>(t);
    linear.push_back(3.0 * x);
    root.push_back(2.0 * std::sqrt(x));
    root_log.push_back(std::sqrt(x * std::log(x)));
  }
  const SlopeFit one = loglog_slope(grid, linear);
  CHECK(one.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one.stderr_ <= 1e-10);
  CHECK(one.intercept == doctest::Approx(std::log2(3.0)).epsilon(1e-10));
  CHECK(loglog_slope(grid, root).slope == doctest::Approx(0.5).epsilon(1e-12));
  const double s = loglog_slope(grid, root_log).slope;
  CHECK(s == doctest::Approx(qr_slope(grid, root_log)).epsilon(1e-10));
  CHECK(s > 0.5);
  CHECK(s < 0.6);
  CHECK_THROWS_AS(loglog_slope({1, 64, 128}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(loglog_slope(grid, std::vector<double>(grid.size(), 0.0)), std::domain_error);
  CHECK_THROWS_AS(loglog_slope({}, {}), std::invalid_argument);
}

TEST_CASE("Wald band") {
  const WaldBand same = wald_band({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  CHECK(same.half_width == std::vector<double>{0.0, 0.0});
  CHECK(same.mean == std::vector<double>{1.0, 2.0});
  const double a = 3.0, b = 7.5;
  const WaldBand two = wald_band({{a}, {b}});
  CHECK(two.mean[0] == doctest::Approx((a + b) / 2));
  CHECK(two.half_width[0] == doctest::Approx(1.96 * std::abs(a - b) / (std::sqrt(2.0) * std::sqrt(2.0))));
  CHECK_THROWS(wald_band({{1.0, 2.0}, {1.0}}));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(5.0, 2.0);
  int covered = 0;
  for (int r = 0; r < 1000; ++r) {
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 40; ++i) samples.push_back({normal(rng)});
    const WaldBand band = wald_band(samples);
    if (std::abs(band.mean[0] - 5.0) <= band.half_width[0]) ++covered;
  }
  CHECK(covered >= 920);
  CHECK(covered <= 975);
}

TEST_CASE("oracle has zero regret and constant pricing is linear") {
  const EnvSpec spec = stochastic_env();
  const TrialResult oracle = run_trial(spec, PolicyKind::kOracle, 4096, 1);
  for (double r : oracle.cum_regret) CHECK(r <= 1e-9);
  const TrialResult constant = run_trial(spec, PolicyKind::kConstant, 4096, 1);
  CHECK(loglog_slope(constant.checkpoints, constant.cum_regret).slope == doctest::Approx(1.0).epsilon(0.02));
  const ExperimentResult exp = run_experiment(spec, {PolicyKind::kOracle, PolicyKind::kConstant}, 4096, 3, 0);
  CHECK(exp.at(PolicyKind::kOracle).curve.slope == 0.0);
  CHECK(exp.at(PolicyKind::kConstant).curve.slope == doctest::Approx(1.0).epsilon(0.02));
  CHECK_THROWS_AS(exp.at(PolicyKind::kPwp), std::out_of_range);
}

TEST_CASE("PwP beats constant pricing at every seed") {
  const EnvSpec spec = stochastic_env();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TrialResult pwp = run_trial(spec, PolicyKind::kPwp, 4096, seed, tuned());
    const TrialResult constant = run_trial(spec, PolicyKind::kConstant, 4096, seed, tuned());
    CHECK(pwp.cum_regret.back() < constant.cum_regret.back());
  }
}

TEST_CASE("cumulative regret is nondecreasing") {
  const EnvSpec spec = stochastic_env();
  TrialOptions options = tuned();
  options.store_rounds = true;
  for (auto kind : {PolicyKind::kPwp, PolicyKind::kRmlp2Modified, PolicyKind::kRmlp2Homoscedastic}) {
    const TrialResult r = run_trial(spec, kind, 2048, 3, options);
    REQUIRE(r.per_round.size() == 2048);
    for (std::size_t i = 1; i < r.per_round.size(); ++i) REQUIRE(r.per_round[i] >= r.per_round[i - 1]);
    CHECK(r.cum_regret.back() == r.per_round.back());
    CHECK(r.checkpoints == checkpoint_grid(2048));
  }
}

TEST_CASE("experiments are deterministic and share random streams") {
  const EnvSpec spec = stochastic_env();
  const std::vector<PolicyKind> kinds{PolicyKind::kPwp, PolicyKind::kConstant};
  const ExperimentResult a = run_experiment(spec, kinds, 1024, 3, 10, tuned(), 1);
  const ExperimentResult b = run_experiment(spec, kinds, 1024, 3, 10, tuned(), 3);
  for (std::size_t p = 0; p < kinds.size(); ++p) {
    CHECK(a.outcomes[p].kind == kinds[p]);
    CHECK(a.outcomes[p].curve.mean == b.outcomes[p].curve.mean);
    CHECK(a.outcomes[p].curve.half_width == b.outcomes[p].curve.half_width);
    CHECK(a.outcomes[p].curve.slope == b.outcomes[p].curve.slope);
    CHECK(a.outcomes[p].curve.trials == 3);
    CHECK(a.outcomes[p].curve.checkpoints == a.outcomes[0].curve.checkpoints);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(a.outcomes[p].trials[t].seed == 10 + t);
      CHECK(a.outcomes[p].trials[t].cum_regret == b.outcomes[p].trials[t].cum_regret);
    }
  }
  // Constant pricing regret depends on the contexts only; matching single
  // trials show the experiment hands each seed the same context stream.
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(a.at(PolicyKind::kConstant).trials[t].cum_regret ==
          run_trial(spec, PolicyKind::kConstant, 1024, 10 + t).cum_regret);
  }
  ContextStream first(spec, 10), second(spec, 10);
  for (int t = 1; t <= 256; ++t) CHECK(first.next(t) == second.next(t));
  CHECK_THROWS_AS(run_experiment(spec, kinds, 1024, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(run_experiment(spec, {}, 1024, 2, 0), std::invalid_argument);
}

TEST_CASE("traced PwP stays under the surrogate bound") {
  const EnvSpec spec = stochastic_env();
  const PricingConstants c = derive_constants(kLink, 0.3, 2, 4096);
  const double bound = 5.0 * (1.0 / c.c_e + c.g_bound * c.d_diam) * 2 * std::log(4096.0);
  TrialOptions options;
  options.trace = true;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const TrialResult r = run_trial(spec, PolicyKind::kPwp, 4096, seed, options);
    REQUIRE(r.trace.size() == 4096);
    CHECK(r.trace.front().step == 1);
    CHECK(r.max_nll_gap <= bound);
    for (const OnsTraceRow& row : r.trace) REQUIRE(row.nll_gap <= r.max_nll_gap);
  }
}

TEST_CASE("expanded contexts feed PwP only") {
  EnvSpec spec = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian,
                               DemandKind::kMisspecifiedValuation, Expansion{Eigen::Vector2d(0.5, 0.5), {0, 1}}, 0);
  const TrialResult pwp = run_trial(spec, PolicyKind::kPwp, 1024, 0, tuned());
  CHECK(pwp.final_params.dim() == 6);
  const TrialResult rmlp = run_trial(spec, PolicyKind::kRmlp2Valuation, 1024, 0, tuned());
  CHECK(rmlp.final_params.dim() == 2);
}
