#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricing_lab {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SummaryRow {
  std::string policy;
  std::string env;
  std::int64_t trials = 0;
  std::int64_t horizon = 0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double final_mean = 0.0;
  double final_halfwidth = 0.0;
};

/// Parses summary.csv content; throws PlotError on a bad header or row.
std::vector<SummaryRow> parse_summary_csv(const std::string& text, const std::string& source);

struct PlotSeries {
  std::string label;
  std::vector<std::int64_t> rounds;
  std::vector<double> mean;
  std::vector<double> half_width;
  double slope = 0.0;      // annotation, as reported in the summary
  double fit_slope = 0.0;  // dashed line
  double fit_intercept = 0.0;
  bool has_fit = false;
};

/// Log2-log2 regret chart: mean curves, shaded Wald bands, dashed fits.
std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series);

/// Reads summary.csv and trials_<policy>.csv from a run directory and writes
/// regret.svg next to them. Returns the written path.
std::filesystem::path plot_run(const std::filesystem::path& run_dir);

}  // namespace pricing_lab
