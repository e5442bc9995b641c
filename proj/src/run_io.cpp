#include "pricing_lab/run_io.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "pricing_lab/environments.hpp"

namespace pricing_lab {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

std::string env_label(const ExperimentConfig& c) {
  return to_string(c.context_kind) + "/" + to_string(c.demand_kind);
}

std::string trials_csv(const std::vector<std::optional<TrialResult>>& trials) {
  std::string out = "trial,t,cum_regret\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i]) continue;
    const TrialResult& r = *trials[i];
    for (std::size_t k = 0; k < r.checkpoints.size(); ++k) {
      out += std::to_string(i) + "," + std::to_string(r.checkpoints[k]) + "," +
             format_real(r.cum_regret[k]) + "\n";
    }
  }
  return out;
}

std::string trace_csv(const std::vector<std::optional<TrialResult>>& trials) {
  std::string out = "trial,step,grad_norm,lambda_min,projection_residual,nll_gap\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i]) continue;
    for (const OnsTraceRow& row : trials[i]->trace) {
      out += std::to_string(i) + "," + std::to_string(row.step) + "," + format_real(row.grad_norm) +
             "," + format_real(row.lambda_min) + "," + format_real(row.projection_residual) + "," +
             format_real(row.nll_gap) + "\n";
    }
  }
  return out;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
  }
  return std::string(buf, end);
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("PRICING_LAB_SEED");
  if (raw == nullptr) return std::nullopt;
  const std::string text(raw);
  std::uint64_t seed = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("PRICING_LAB_SEED", 0, "expected a non-negative integer, got '" + text + "'");
  }
  return seed;
}

std::string constants_json(const PricingConstants& c, double sigma, const OnsHyper& defaults,
                           const std::optional<OnsHyper>& effective) {
  nlohmann::ordered_json j;
  j["sigma"] = sigma;
  j["c_beta"] = c.c_beta;
  j["d"] = c.d;
  j["T"] = c.horizon;
  j["J01"] = c.j01;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["delta"] = c.delta;
  j["C_l"] = c.c_l;
  j["C_G"] = c.c_g;
  j["C_e"] = c.c_e;
  j["C_J"] = c.c_j;
  j["c_r"] = c.c_r;
  j["G"] = c.g_bound;
  j["D"] = c.d_diam;
  j["gamma"] = defaults.gamma;
  j["epsilon"] = defaults.epsilon;
  if (effective) {
    j["ons_gamma"] = effective->gamma;
    j["ons_epsilon"] = effective->epsilon;
  }
  return j.dump(2) + "\n";
}

fs::path create_run_directory(const fs::path& base, const std::string& name) {
  fs::create_directories(base);
  const std::string stem = name + "-" + timestamp_utc();
  for (int suffix = 0; suffix < 10000; ++suffix) {
    const fs::path dir = base / (suffix == 0 ? stem : stem + "-" + std::to_string(suffix));
    std::error_code ec;
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  }
  throw std::runtime_error("cannot find a free run directory under " + base.string());
}

RunFiles render_run_files(const ExperimentConfig& config, const ExperimentBatch& batch,
                          std::int64_t horizon, bool trace) {
  RunFiles files;
  std::string summary = "policy,env,trials,T,slope,slope_stderr,final_mean,final_halfwidth\n";
  std::string diagnostics =
      "policy,trial,price_clamps,projection_nonconvergences,refits,line_search_stalls\n";
  for (std::size_t p = 0; p < batch.policies.size(); ++p) {
    const std::string name = to_string(batch.policies[p]);
    const auto& trials = batch.trials[p];
    files.files.emplace_back("trials_" + name + ".csv", trials_csv(trials));
    if (trace && batch.policies[p] == PolicyKind::kPwp) {
      files.files.emplace_back("trace_" + name + ".csv", trace_csv(trials));
    }
    std::vector<TrialResult> done;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (!trials[i]) continue;
      done.push_back(*trials[i]);
      const TrialDiagnostics& d = trials[i]->diagnostics;
      diagnostics += name + "," + std::to_string(i) + "," + std::to_string(d.price_clamps) + "," +
                     std::to_string(d.projection_nonconvergences) + "," + std::to_string(d.refits) +
                     "," + std::to_string(d.line_search_stalls) + "\n";
    }
    if (done.size() < 2) continue;
    const RegretCurve curve = summarize(done);
    summary += name + "," + env_label(config) + "," + std::to_string(curve.trials) + "," +
               std::to_string(horizon) + "," + format_real(curve.slope) + "," +
               format_real(curve.slope_stderr) + "," + format_real(curve.mean.back()) + "," +
               format_real(curve.half_width.back()) + "\n";
  }
  files.files.emplace_back("summary.csv", summary);
  files.files.emplace_back("diagnostics.csv", diagnostics);
  return files;
}

RunReport execute_run(const RunRequest& request) {
  ExperimentConfig config = request.config;
  if (request.seed_override) {
    if (!config.env_seed) config.env_seed = config.base_seed;
    config.base_seed = *request.seed_override;
  }
  if (!config.env_seed) config.env_seed = config.base_seed;
  const EnvSpec spec = materialize_env(config);
  const ExperimentConfig snapshot = with_materialized(config, spec);
  TrialOptions options = trial_options(config);
  options.trace = request.trace;

  const LinkModel link(config.sigma);
  const PricingConstants constants = derive_constants(link, config.c_beta, config.d, config.horizon);
  std::optional<OnsHyper> effective;
  if (config.ons_gamma) {
    effective = hyperparameters_for_gamma(*config.ons_gamma, constants.d_diam);
    if (config.ons_epsilon) effective->epsilon = *config.ons_epsilon;
  }

  const ExperimentBatch batch = run_batch(spec, config.policies, config.horizon, config.trials,
                                          config.base_seed, options, request.jobs);

  RunReport report;
  if (batch.failure) {
    try {
      std::rethrow_exception(batch.failure);
    } catch (const std::exception& e) {
      report.error = e.what();
    } catch (...) {
      report.error = "unknown error";
    }
  }
  report.complete = !batch.failure;

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("config.json", serialize_config(snapshot));
  files.emplace_back("constants.json",
                     constants_json(constants, config.sigma, default_hyperparameters(constants), effective));
  for (auto& f : render_run_files(config, batch, config.horizon, request.trace).files) {
    files.push_back(std::move(f));
  }

  report.directory = create_run_directory(request.output_dir.value_or(config.output_dir), config.name);
  std::string manifest = std::string("status: ") + (report.complete ? "complete" : "incomplete") + "\n";
  if (!report.complete) {
    std::size_t done = 0, total = 0;
    for (const auto& per_policy : batch.trials) {
      for (const auto& t : per_policy) {
        total += 1;
        done += t.has_value();
      }
    }
    manifest += "error: " + report.error + "\n";
    manifest += "trials_completed: " + std::to_string(done) + "/" + std::to_string(total) + "\n";
  }
  manifest += "files:\n";
  for (const auto& [name, content] : files) {
    write_file(report.directory / name, content);
    report.files.push_back(name);
    manifest += "  " + name + "\n";
  }
  write_file(report.directory / "MANIFEST", manifest);
  report.files.push_back("MANIFEST");
  return report;
}

}  // namespace pricing_lab
