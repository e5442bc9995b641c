#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pricing_lab/config.hpp"
#include "pricing_lab/link_math.hpp"
#include "pricing_lab/ons.hpp"
#include "pricing_lab/plot.hpp"
#include "pricing_lab/run_io.hpp"
#include "pricing_lab/verify.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2, kVerifyFailed = 3 };

int run_command(const std::string& config_path, const std::string& out_dir, int jobs, bool trace) {
  pricing_lab::RunRequest request;
  request.config = pricing_lab::load_config(config_path);
  request.seed_override = pricing_lab::seed_from_environment();
  if (!out_dir.empty()) request.output_dir = out_dir;
  request.jobs = jobs;
  request.trace = trace;
  const pricing_lab::RunReport report = pricing_lab::execute_run(request);
  std::cout << report.directory.string() << "\n";
  if (!report.complete) {
    std::cerr << "error: run incomplete: " << report.error << "\n"
              << "partial results kept in " << report.directory.string() << "\n";
    return kRuntime;
  }
  return kOk;
}

int constants_command(double sigma, double c_beta, int d, std::int64_t horizon) {
  const pricing_lab::LinkModel link(sigma);
  const pricing_lab::PricingConstants c = pricing_lab::derive_constants(link, c_beta, d, horizon);
  std::cout << pricing_lab::constants_json(c, sigma, pricing_lab::default_hyperparameters(c));
  return kOk;
}

int verify_command(std::uint64_t seed, double gradient_fault) {
  pricing_lab::VerifyOptions options;
  options.seed = seed;
  options.gradient_fault = gradient_fault;
  bool all = true;
  for (const pricing_lab::PropertyResult& r : pricing_lab::run_verify(options)) {
    std::printf("%s %-42s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%s\n", all ? "all properties passed" : "some properties FAILED");
  return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual dynamic pricing simulation lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 1;
  bool trace = false;
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write a new run directory");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Parent directory for the run (overrides output_dir)");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1, 1024));
  run->add_flag("--trace", trace, "Record per-round ONS diagnostics for PwP");

  std::string run_dir;
  CLI::App* plot = app.add_subcommand("plot", "Write regret.svg for a run directory");
  plot->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  double sigma = 0.5, c_beta = 0.3;
  int d = 2;
  std::int64_t horizon = 65536;
  CLI::App* constants = app.add_subcommand("constants", "Print derived constants as JSON");
  constants->add_option("--sigma", sigma, "Noise scale")->check(CLI::PositiveNumber);
  constants->add_option("--c-beta", c_beta, "Elasticity lower bound")->check(CLI::Range(1e-6, 1.0 - 1e-6));
  constants->add_option("--d", d, "Context dimension")->check(CLI::Range(1, 64));
  constants->add_option("--T", horizon, "Horizon")->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));

  std::uint64_t verify_seed = pricing_lab::VerifyOptions{}.seed;
  double gradient_fault = 1.0;
  CLI::App* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks");
  verify->add_option("--gradient-fault", gradient_fault, "Scale analytic gradients (fault injection)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (run->parsed()) return run_command(config_path, out_dir, jobs, trace);
    if (plot->parsed()) {
      std::cout << pricing_lab::plot_run(run_dir).string() << "\n";
      return kOk;
    }
    if (constants->parsed()) return constants_command(sigma, c_beta, d, horizon);
    if (verify->parsed()) return verify_command(verify_seed, gradient_fault);
  } catch (const pricing_lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
