#include "pricing_lab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pricing_lab {
namespace {

using nlohmann::json;

constexpr std::int64_t kMinHorizon = 256;
constexpr std::int64_t kMaxHorizon = std::int64_t{1} << 26;

const std::set<std::string> kTopLevelKeys = {
    "name",      "T",          "d",           "sigma",      "c_beta",     "trials",
    "base_seed", "context_kind", "demand_kind", "policies",  "expansion",  "output_dir",
    "ons_gamma", "ons_epsilon", "init_norm",  "mle_restarts", "env_seed", "theta_star",
    "eta_star",  "mu_x",       "cov_x"};
const std::set<std::string> kExpansionKeys = {"x0", "a"};

int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Line of the first `"key":` after `from`; 0 if absent.
int key_line(const std::string& text, const std::string& key, std::size_t from = 0) {
  const std::string quoted = "\"" + key + "\"";
  for (std::size_t pos = text.find(quoted, from); pos != std::string::npos;
       pos = text.find(quoted, pos + 1)) {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':') return line_at(text, pos);
  }
  return 0;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message,
                         std::size_t from = 0) const {
    throw ConfigError(source_, key.empty() ? 0 : key_line(text_, key, from),
                      (key.empty() ? "" : "'" + key + "': ") + message);
  }

  double real(const json& j, const std::string& key) const {
    if (!j.is_number()) fail(key, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }

  std::int64_t integer(const json& j, const std::string& key) const {
    if (!j.is_number_integer()) fail(key, "expected an integer");
    if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      fail(key, "integer out of range");
    }
    return j.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const json& j, const std::string& key) const {
    if (!j.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }

  std::string string(const json& j, const std::string& key) const {
    if (!j.is_string()) fail(key, "expected a string");
    return j.get<std::string>();
  }

  Eigen::VectorXd vector(const json& j, const std::string& key) const {
    if (!j.is_array() || j.empty()) fail(key, "expected a non-empty array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = real(j[i], key);
    return v;
  }

  Eigen::MatrixXd matrix(const json& j, const std::string& key) const {
    if (!j.is_array() || j.empty()) fail(key, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::VectorXd row = vector(j[static_cast<std::size_t>(r)], key);
      if (r == 0) m.resize(rows, row.size());
      if (row.size() != m.cols()) fail(key, "rows have different lengths");
      m.row(r) = row.transpose();
    }
    return m;
  }

  template <typename F>
  auto enumerated(const json& j, const std::string& key, F parse) const {
    const std::string s = string(j, key);
    try {
      return parse(s);
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }

  const std::string& text() const { return text_; }

 private:
  const std::string& text_;
  std::string source_;
};

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

void validate(const ExperimentConfig& c, const Reader& in) {
  if (c.name.empty()) in.fail("name", "must not be empty");
  if (c.name.find_first_of("/\\") != std::string::npos) in.fail("name", "must not contain path separators");
  if (c.horizon < kMinHorizon || c.horizon > kMaxHorizon) {
    in.fail("T", "must be in [" + std::to_string(kMinHorizon) + ", " + std::to_string(kMaxHorizon) + "]");
  }
  if (c.d < 1 || c.d > 64) in.fail("d", "must be in [1, 64]");
  if (!(c.sigma > 0.0)) in.fail("sigma", "must be positive");
  if (!(c.c_beta > 0.0 && c.c_beta < 1.0)) in.fail("c_beta", "must be in (0, 1)");
  if (c.trials < 2 || c.trials > 100000) in.fail("trials", "must be in [2, 100000]");
  if (c.policies.empty()) in.fail("policies", "must list at least one policy");
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (c.policies[i] == c.policies[j]) in.fail("policies", "duplicate policy '" + to_string(c.policies[i]) + "'");
    }
  }
  if (c.context_kind == ContextKind::kAdversarialTriangular && c.d != 2) {
    in.fail("context_kind", "adversarial-triangular requires d = 2");
  }
  if (c.expansion) {
    const std::size_t at = in.text().find("\"expansion\"");
    if (c.expansion->x0.size() != c.d) in.fail("x0", "must have d entries", at);
    if (c.expansion->powers.empty()) in.fail("a", "must not be empty", at);
  }
  if (c.ons_gamma && !(*c.ons_gamma > 0.0)) in.fail("ons_gamma", "must be positive");
  if (c.ons_epsilon && !(*c.ons_epsilon > 0.0)) in.fail("ons_epsilon", "must be positive");
  if (!(c.init_norm >= 0.0 && c.init_norm <= 1.0)) in.fail("init_norm", "must be in [0, 1]");
  if (c.mle_restarts < 1 || c.mle_restarts > 1000) in.fail("mle_restarts", "must be in [1, 1000]");
  auto check_dim = [&](const std::optional<Eigen::VectorXd>& v, const char* key) {
    if (v && v->size() != c.d) in.fail(key, "must have d entries");
  };
  check_dim(c.theta_star, "theta_star");
  check_dim(c.eta_star, "eta_star");
  check_dim(c.mu_x, "mu_x");
  if (c.theta_star && c.theta_star->norm() > 1.0 + 1e-12) in.fail("theta_star", "norm must be at most 1");
  if (c.eta_star && c.eta_star->norm() > 1.0 + 1e-12) in.fail("eta_star", "norm must be at most 1");
  if (c.theta_star.has_value() != c.eta_star.has_value()) {
    in.fail(c.theta_star ? "theta_star" : "eta_star", "theta_star and eta_star must be given together");
  }
  if (c.cov_x) {
    if (c.cov_x->rows() != c.d || c.cov_x->cols() != c.d) in.fail("cov_x", "must be d x d");
    if (!c.cov_x->isApprox(c.cov_x->transpose(), 1e-12)) in.fail("cov_x", "must be symmetric");
    if (c.cov_x->llt().info() != Eigen::Success) in.fail("cov_x", "must be positive definite");
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : "") + ": " + message),
      line_(line) {}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto same_vec = [](const std::optional<Eigen::VectorXd>& a, const std::optional<Eigen::VectorXd>& b) {
    return a.has_value() == b.has_value() && (!a || (a->size() == b->size() && *a == *b));
  };
  const bool same_cov = cov_x.has_value() == o.cov_x.has_value() &&
                        (!cov_x || (cov_x->rows() == o.cov_x->rows() &&
                                    cov_x->cols() == o.cov_x->cols() && *cov_x == *o.cov_x));
  const bool same_expansion =
      expansion.has_value() == o.expansion.has_value() &&
      (!expansion || (expansion->x0.size() == o.expansion->x0.size() &&
                      expansion->x0 == o.expansion->x0 && expansion->powers == o.expansion->powers));
  return name == o.name && horizon == o.horizon && d == o.d && sigma == o.sigma &&
         c_beta == o.c_beta && trials == o.trials && base_seed == o.base_seed &&
         context_kind == o.context_kind && demand_kind == o.demand_kind && policies == o.policies &&
         same_expansion && output_dir == o.output_dir && ons_gamma == o.ons_gamma &&
         ons_epsilon == o.ons_epsilon && init_norm == o.init_norm &&
         mle_restarts == o.mle_restarts && env_seed == o.env_seed && same_vec(theta_star, o.theta_star) &&
         same_vec(eta_star, o.eta_star) && same_vec(mu_x, o.mu_x) && same_cov;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source, line_at(text, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON");
  }
  const Reader in(text, source);
  if (!root.is_object()) throw ConfigError(source, 1, "top level must be a JSON object");
  for (const auto& [key, value] : root.items()) {
    if (!kTopLevelKeys.count(key)) in.fail(key, "unknown key");
  }
  for (const char* required : {"name", "T", "d", "trials", "base_seed", "context_kind", "demand_kind", "policies"}) {
    if (!root.contains(required)) throw ConfigError(source, 0, std::string("missing required key '") + required + "'");
  }

  ExperimentConfig c;
  c.name = in.string(root["name"], "name");
  c.horizon = in.integer(root["T"], "T");
  const std::int64_t d = in.integer(root["d"], "d");
  if (d < 1 || d > 64) in.fail("d", "must be in [1, 64]");
  c.d = static_cast<int>(d);
  if (root.contains("sigma")) c.sigma = in.real(root["sigma"], "sigma");
  if (root.contains("c_beta")) c.c_beta = in.real(root["c_beta"], "c_beta");
  const std::int64_t trials = in.integer(root["trials"], "trials");
  if (trials < 2 || trials > 100000) in.fail("trials", "must be in [2, 100000]");
  c.trials = static_cast<int>(trials);
  c.base_seed = in.unsigned_integer(root["base_seed"], "base_seed");
  c.context_kind = in.enumerated(root["context_kind"], "context_kind", parse_context_kind);
  c.demand_kind = in.enumerated(root["demand_kind"], "demand_kind", parse_demand_kind);
  const json& policies = root["policies"];
  if (!policies.is_array()) in.fail("policies", "expected an array of policy names");
  for (const json& p : policies) c.policies.push_back(in.enumerated(p, "policies", parse_policy_kind));
  if (root.contains("expansion") && !root["expansion"].is_null()) {
    const json& e = root["expansion"];
    if (!e.is_object()) in.fail("expansion", "expected an object with keys x0 and a, or null");
    const std::size_t at = text.find("\"expansion\"");
    for (const auto& [key, value] : e.items()) {
      if (!kExpansionKeys.count(key)) in.fail(key, "unknown key in expansion", at);
    }
    if (!e.contains("x0") || !e.contains("a")) in.fail("expansion", "requires both x0 and a");
    Expansion ex;
    ex.x0 = in.vector(e["x0"], "x0");
    if (!e["a"].is_array()) in.fail("a", "expected an array of integers", at);
    for (const json& a : e["a"]) {
      const std::int64_t power = in.integer(a, "a");
      if (power < -16 || power > 16) in.fail("a", "powers must be in [-16, 16]", at);
      ex.powers.push_back(static_cast<int>(power));
    }
    c.expansion = std::move(ex);
  }
  if (root.contains("output_dir")) c.output_dir = in.string(root["output_dir"], "output_dir");
  if (root.contains("ons_gamma") && !root["ons_gamma"].is_null()) c.ons_gamma = in.real(root["ons_gamma"], "ons_gamma");
  if (root.contains("ons_epsilon") && !root["ons_epsilon"].is_null()) c.ons_epsilon = in.real(root["ons_epsilon"], "ons_epsilon");
  if (root.contains("init_norm")) c.init_norm = in.real(root["init_norm"], "init_norm");
  if (root.contains("mle_restarts")) {
    const std::int64_t r = in.integer(root["mle_restarts"], "mle_restarts");
    if (r < 1 || r > 1000) in.fail("mle_restarts", "must be in [1, 1000]");
    c.mle_restarts = static_cast<int>(r);
  }
  if (root.contains("env_seed") && !root["env_seed"].is_null()) c.env_seed = in.unsigned_integer(root["env_seed"], "env_seed");
  if (root.contains("theta_star")) c.theta_star = in.vector(root["theta_star"], "theta_star");
  if (root.contains("eta_star")) c.eta_star = in.vector(root["eta_star"], "eta_star");
  if (root.contains("mu_x")) c.mu_x = in.vector(root["mu_x"], "mu_x");
  if (root.contains("cov_x")) c.cov_x = in.matrix(root["cov_x"], "cov_x");
  validate(c, in);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError(path.string(), 0, "cannot open file");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& c) {
  json j = json::object();
  j["name"] = c.name;
  j["T"] = c.horizon;
  j["d"] = c.d;
  j["sigma"] = c.sigma;
  j["c_beta"] = c.c_beta;
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["context_kind"] = to_string(c.context_kind);
  j["demand_kind"] = to_string(c.demand_kind);
  json policies = json::array();
  for (PolicyKind p : c.policies) policies.push_back(to_string(p));
  j["policies"] = policies;
  if (c.expansion) {
    j["expansion"] = {{"x0", vector_json(c.expansion->x0)}, {"a", c.expansion->powers}};
  } else {
    j["expansion"] = nullptr;
  }
  j["output_dir"] = c.output_dir;
  if (c.ons_gamma) j["ons_gamma"] = *c.ons_gamma;
  if (c.ons_epsilon) j["ons_epsilon"] = *c.ons_epsilon;
  j["init_norm"] = c.init_norm;
  j["mle_restarts"] = c.mle_restarts;
  if (c.env_seed) j["env_seed"] = *c.env_seed;
  if (c.theta_star) j["theta_star"] = vector_json(*c.theta_star);
  if (c.eta_star) j["eta_star"] = vector_json(*c.eta_star);
  if (c.mu_x) j["mu_x"] = vector_json(*c.mu_x);
  if (c.cov_x) j["cov_x"] = matrix_json(*c.cov_x);
  return j.dump(2) + "\n";
}

EnvSpec materialize_env(const ExperimentConfig& c) {
  EnvSpec spec = make_env_spec(c.d, c.c_beta, c.sigma, c.context_kind, c.demand_kind, c.expansion,
                               c.env_seed.value_or(c.base_seed));
  if (c.theta_star) spec.theta_star = *c.theta_star;
  if (c.eta_star) spec.eta_star = *c.eta_star;
  if (c.mu_x) spec.mu_x = *c.mu_x;
  if (c.cov_x) spec.cov_x = *c.cov_x;
  return spec;
}

ExperimentConfig with_materialized(const ExperimentConfig& config, const EnvSpec& spec) {
  ExperimentConfig out = config;
  out.theta_star = spec.theta_star;
  out.eta_star = spec.eta_star;
  out.mu_x = spec.mu_x;
  out.cov_x = spec.cov_x;
  return out;
}

TrialOptions trial_options(const ExperimentConfig& c) {
  TrialOptions options;
  options.policy.c_beta = c.c_beta;
  options.policy.ons_gamma = c.ons_gamma;
  options.policy.ons_epsilon = c.ons_epsilon;
  options.policy.init_norm = c.init_norm;
  options.policy.mle_restarts = c.mle_restarts;
  return options;
}

}  // namespace pricing_lab
