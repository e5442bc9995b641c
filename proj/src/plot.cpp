#include "pricing_lab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pricing_lab/harness.hpp"

namespace pricing_lab {
namespace {

namespace fs = std::filesystem;

constexpr double kWidth = 760.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 56.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlotError("missing file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double to_real(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw PlotError(where + ": not a number: '" + s + "'");
  return v;
}

std::int64_t to_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw PlotError(where + ": not an integer: '" + s + "'");
  return v;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

PlotSeries load_series(const fs::path& path, const SummaryRow& row) {
  const std::vector<std::string> lines = lines_of(read_text(path));
  const std::string where = path.filename().string();
  if (lines.empty() || lines.front() != "trial,t,cum_regret") {
    throw PlotError(where + ": expected header 'trial,t,cum_regret'");
  }
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, double>>> by_trial;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string at = where + ":" + std::to_string(i + 1);
    const auto fields = split(lines[i], ',');
    if (fields.size() != 3) throw PlotError(at + ": expected 3 fields");
    by_trial[to_int(fields[0], at)].emplace_back(to_int(fields[1], at), to_real(fields[2], at));
  }
  if (by_trial.size() < 2) throw PlotError(where + ": fewer than 2 trials");
  PlotSeries s;
  s.label = row.policy;
  s.slope = row.slope;
  std::vector<std::vector<double>> samples;
  for (const auto& [trial, points] : by_trial) {
    std::vector<std::int64_t> rounds;
    std::vector<double> values;
    for (const auto& [t, v] : points) {
      rounds.push_back(t);
      values.push_back(v);
    }
    if (s.rounds.empty()) s.rounds = rounds;
    if (rounds != s.rounds) throw PlotError(where + ": trial " + std::to_string(trial) + " uses a different grid");
    samples.push_back(std::move(values));
  }
  WaldBand band = wald_band(samples);
  s.mean = std::move(band.mean);
  s.half_width = std::move(band.half_width);
  bool positive = s.rounds.size() >= 3;
  const double start = static_cast<double>(s.rounds.back()) / 64.0;
  for (std::size_t i = 0; i < s.mean.size(); ++i) {
    if (static_cast<double>(s.rounds[i]) >= start && !(s.mean[i] > 0.0)) positive = false;
  }
  if (positive) {
    const SlopeFit fit = loglog_slope(s.rounds, s.mean);
    s.fit_slope = fit.slope;
    s.fit_intercept = fit.intercept;
    s.has_fit = true;
  }
  return s;
}

}  // namespace

std::vector<SummaryRow> parse_summary_csv(const std::string& text, const std::string& source) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty() ||
      lines.front() != "policy,env,trials,T,slope,slope_stderr,final_mean,final_halfwidth") {
    throw PlotError(source + ": unexpected summary header");
  }
  std::vector<SummaryRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string at = source + ":" + std::to_string(i + 1);
    const auto f = split(lines[i], ',');
    if (f.size() != 8) throw PlotError(at + ": expected 8 fields");
    SummaryRow r;
    r.policy = f[0];
    r.env = f[1];
    r.trials = to_int(f[2], at);
    r.horizon = to_int(f[3], at);
    r.slope = to_real(f[4], at);
    r.slope_stderr = to_real(f[5], at);
    r.final_mean = to_real(f[6], at);
    r.final_halfwidth = to_real(f[7], at);
    if (r.policy.empty() || r.policy.find_first_of("/\\") != std::string::npos) {
      throw PlotError(at + ": bad policy name");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series) {
  if (series.empty()) throw PlotError("nothing to plot: no policies");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  double smallest = x_lo;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      x_lo = std::min(x_lo, std::log2(static_cast<double>(s.rounds[i])));
      x_hi = std::max(x_hi, std::log2(static_cast<double>(s.rounds[i])));
      if (s.mean[i] > 0.0) smallest = std::min(smallest, s.mean[i]);
      const double upper = s.mean[i] + s.half_width[i];
      if (upper > 0.0) y_hi = std::max(y_hi, std::log2(upper));
    }
  }
  if (!std::isfinite(x_lo) || x_hi <= x_lo) throw PlotError("nothing to plot: empty curves");
  if (!std::isfinite(smallest)) {
    smallest = 1.0;
    y_hi = 1.0;
  }
  const double floor_value = smallest / 2.0;
  y_lo = std::log2(floor_value);
  x_lo = std::floor(x_lo);
  x_hi = std::ceil(x_hi);
  y_lo = std::floor(y_lo);
  y_hi = std::ceil(std::max(y_hi, y_lo + 1.0));

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double ly) { return kTop + (y_hi - ly) / (y_hi - y_lo) * ph; };
  auto ly = [&](double v) { return std::log2(std::max(v, floor_value)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << escape(title) << "</text>\n";

  // Grid and ticks.
  const int x_step = x_hi - x_lo > 12 ? 2 : 1;
  for (int k = static_cast<int>(x_lo); k <= static_cast<int>(x_hi); k += x_step) {
    const double x = px(k);
    svg << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << kTop << "\" x2=\"" << fmt("%.2f", x)
        << "\" y2=\"" << kTop + ph << "\" stroke=\"#e6e6e6\"/>\n";
    svg << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">2^" << k << "</text>\n";
  }
  const int y_step = std::max(1, static_cast<int>(std::ceil((y_hi - y_lo) / 10.0)));
  for (int k = static_cast<int>(y_lo); k <= static_cast<int>(y_hi); k += y_step) {
    const double y = py(k);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << kLeft + pw
        << "\" y2=\"" << fmt("%.2f", y) << "\" stroke=\"#e6e6e6\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt("%.2f", y + 4)
        << "\" text-anchor=\"end\">2^" << k << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14
      << "\" text-anchor=\"middle\">round t (log2)</text>\n";
  svg << "<text transform=\"translate(18," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">cumulative regret (log2)</text>\n";

  for (std::size_t n = 0; n < series.size(); ++n) {
    const PlotSeries& s = series[n];
    const char* color = kPalette[n % std::size(kPalette)];
    const std::string label = escape(s.label);
    svg << "<g class=\"series\" data-policy=\"" << label << "\">\n";
    // Band: upper edge forward, lower edge back.
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      svg << fmt("%.2f", px(std::log2(static_cast<double>(s.rounds[i])))) << ","
          << fmt("%.2f", py(ly(s.mean[i] + s.half_width[i]))) << " ";
    }
    for (std::size_t i = s.rounds.size(); i-- > 0;) {
      svg << fmt("%.2f", px(std::log2(static_cast<double>(s.rounds[i])))) << ","
          << fmt("%.2f", py(ly(s.mean[i] - s.half_width[i]))) << " ";
    }
    svg << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      svg << fmt("%.2f", px(std::log2(static_cast<double>(s.rounds[i])))) << ","
          << fmt("%.2f", py(ly(s.mean[i]))) << " ";
    }
    svg << "\"/>\n";
    if (s.has_fit) {
      const double a = std::log2(static_cast<double>(s.rounds.back()) / 64.0);
      const double b = std::log2(static_cast<double>(s.rounds.back()));
      svg << "<line class=\"fit\" x1=\"" << fmt("%.2f", px(a)) << "\" y1=\""
          << fmt("%.2f", py(s.fit_intercept + s.fit_slope * a)) << "\" x2=\"" << fmt("%.2f", px(b))
          << "\" y2=\"" << fmt("%.2f", py(s.fit_intercept + s.fit_slope * b)) << "\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    }
    const double ly0 = kTop + 12 + 36.0 * static_cast<double>(n);
    const double lx0 = kLeft + pw + 14;
    svg << "<line x1=\"" << lx0 << "\" y1=\"" << ly0 << "\" x2=\"" << lx0 + 22 << "\" y2=\"" << ly0
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text class=\"label\" x=\"" << lx0 + 28 << "\" y=\"" << ly0 + 4 << "\">" << label << "</text>\n";
    svg << "<text class=\"slope\" x=\"" << lx0 + 28 << "\" y=\"" << ly0 + 20 << "\">slope "
        << fmt("%.3f", s.slope) << "</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

fs::path plot_run(const fs::path& run_dir) {
  const fs::path summary_path = run_dir / "summary.csv";
  const std::vector<SummaryRow> rows = parse_summary_csv(read_text(summary_path), summary_path.string());
  if (rows.empty()) throw PlotError(summary_path.string() + ": nothing to plot: no policies");
  std::vector<PlotSeries> series;
  for (const SummaryRow& row : rows) {
    series.push_back(load_series(run_dir / ("trials_" + row.policy + ".csv"), row));
  }
  std::string title = run_dir.filename().string();
  const fs::path config_path = run_dir / "config.json";
  if (fs::exists(config_path)) {
    try {
      const auto config = nlohmann::json::parse(read_text(config_path));
      title = config.at("name").get<std::string>();
    } catch (const std::exception&) {
    }
  }
  title += " (" + rows.front().env + ", T=" + std::to_string(rows.front().horizon) + ")";
  const std::string svg = render_svg(title, series);
  const fs::path out = run_dir / "regret.svg";
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file || !(file << svg)) throw PlotError("cannot write " + out.string());
  return out;
}

}  // namespace pricing_lab
