#include <doctest.h>

#include <random>
#include <stdexcept>
#include <string>

#include "pricing_lab/config.hpp"

using namespace pricing_lab;

namespace {

const char* kBase = R"({
  "name": "demo",
  "T": 4096,
  "d": 2,
  "sigma": 0.5,
  "c_beta": 0.3,
  "trials": 3,
  "base_seed": 7,
  "context_kind": "stochastic-gaussian",
  "demand_kind": "glm",
  "policies": ["pwp", "rmlp2-modified"]
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

int error_line(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("cfg.json", 0) == 0);
    return e.line();
  }
  FAIL("config was accepted");
  return -1;
}

}  // namespace

TEST_CASE("parse a minimal config") {
  const ExperimentConfig c = parse_config(kBase);
  CHECK(c.name == "demo");
  CHECK(c.horizon == 4096);
  CHECK(c.d == 2);
  CHECK(c.trials == 3);
  CHECK(c.base_seed == 7);
  CHECK(c.policies == std::vector<PolicyKind>{PolicyKind::kPwp, PolicyKind::kRmlp2Modified});
  CHECK_FALSE(c.expansion.has_value());
  CHECK(c.output_dir == "runs");
  CHECK_FALSE(c.ons_gamma.has_value());
  CHECK(c.init_norm == 0.5);
  CHECK(c.mle_restarts == 8);
}

TEST_CASE("strict errors point at the offending line") {
  CHECK(error_line(replace(kBase, "\"d\": 2,", "\"d\": 2,\n  \"colour\": 1,")) == 5);
  CHECK(error_line(replace(kBase, "\"T\": 4096", "\"T\": 100")) == 3);
  CHECK(error_line(replace(kBase, "\"T\": 4096", "\"T\": \"big\"")) == 3);
  CHECK(error_line(replace(kBase, "\"sigma\": 0.5", "\"sigma\": -1")) == 5);
  CHECK(error_line(replace(kBase, "\"c_beta\": 0.3", "\"c_beta\": 1.5")) == 6);
  CHECK(error_line(replace(kBase, "\"trials\": 3", "\"trials\": 1")) == 7);
  CHECK(error_line(replace(kBase, "\"base_seed\": 7", "\"base_seed\": -7")) == 8);
  CHECK(error_line(replace(kBase, "\"glm\"", "\"logit\"")) == 10);
  CHECK(error_line(replace(kBase, "\"rmlp2-modified\"", "\"pwp\"")) == 11);
  CHECK(error_line(replace(kBase, "\"rmlp2-modified\"", "\"ucb\"")) == 11);
  CHECK(error_line(replace(kBase, "\"stochastic-gaussian\"", "\"adversarial-triangular\"")
                        .replace(std::string(kBase).find("\"d\": 2"), 6, "\"d\": 3")) == 9);
  CHECK(error_line(replace(kBase, "\"demo\"", "\"a/b\"")) == 2);
  CHECK(error_line(replace(kBase, "\"trials\": 3,", "\"trials\": 3,,")) == 7);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"expansion\": {\"x0\": [0.5], \"a\": [1]},\n  \"policies\"")) == 11);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"expansion\": {\"x0\": [0.5, 0.5],\n \"a\": [40]},\n  \"policies\"")) == 12);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"expansion\": {\"x0\": [0.5, 0.5], \"b\": 1},\n  \"policies\"")) == 11);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"theta_star\": [1.0, 1.0],\n  \"eta_star\": [0.5, 0.5],\n  \"policies\"")) == 11);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"cov_x\": [[1, 2], [2, 1]],\n  \"policies\"")) == 11);
  CHECK(error_line(replace(kBase, "\"policies\"", "\"mle_restarts\": 0,\n  \"policies\"")) == 11);
  CHECK(error_line(replace(kBase, "  \"trials\": 3,\n", "")) == 0);
  CHECK(error_line("[1, 2]") == 1);
}

TEST_CASE("serialize and parse round-trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    ExperimentConfig c = parse_config(kBase);
    c.name = "case" + std::to_string(i);
    c.horizon = 256 + static_cast<std::int64_t>(rng() % 100000);
    c.sigma = 0.1 + unit(rng);
    c.c_beta = 0.05 + 0.25 * unit(rng);
    c.trials = 2 + static_cast<int>(rng() % 50);
    c.base_seed = rng();
    c.init_norm = unit(rng);
    if (i % 2 == 0) {
      c.expansion = Expansion{Eigen::Vector2d(unit(rng), unit(rng)), {0, 1, static_cast<int>(rng() % 5)}};
      c.ons_gamma = unit(rng);
      c.ons_epsilon = 1.0 + unit(rng);
      c.env_seed = rng() % 1000;
    }
    if (i % 3 == 0) {
      const EnvSpec spec = materialize_env(c);
      c = with_materialized(c, spec);
    }
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
  }
}

TEST_CASE("materialized environment") {
  ExperimentConfig c = parse_config(kBase);
  const EnvSpec spec = materialize_env(c);
  const EnvSpec direct = make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian, DemandKind::kGlm,
                                       std::nullopt, 7);
  CHECK(spec.theta_star == direct.theta_star);
  CHECK(spec.cov_x == direct.cov_x);
  c.env_seed = 0;
  CHECK(materialize_env(c).theta_star == make_env_spec(2, 0.3, 0.5, ContextKind::kStochasticGaussian,
                                                       DemandKind::kGlm, std::nullopt, 0).theta_star);
  const ExperimentConfig snapshot = with_materialized(c, spec);
  REQUIRE(snapshot.theta_star.has_value());
  CHECK(*snapshot.theta_star == spec.theta_star);
  CHECK(*snapshot.cov_x == spec.cov_x);
  ExperimentConfig reseeded = snapshot;
  reseeded.env_seed = 99;
  CHECK(materialize_env(reseeded).theta_star == spec.theta_star);

  c.ons_gamma = 0.25;
  c.mle_restarts = 3;
  const TrialOptions options = trial_options(c);
  CHECK(options.policy.ons_gamma == 0.25);
  CHECK(options.policy.mle_restarts == 3);
  CHECK(options.policy.c_beta == 0.3);
}

TEST_CASE("load_config reports missing files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
