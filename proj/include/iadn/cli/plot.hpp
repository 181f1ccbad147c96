#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "iadn/evaluation/curve.hpp"
#include "iadn/evaluation/report.hpp"
#include "iadn/netgraph/config.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

namespace detail {

struct PlotFrame {
  double left = 70, top = 20, width = 420, height = 320;
  double log_x0 = -2.25, log_x1 = 0.25;  // FPPI 10^-2.25 .. 10^0.25
  double log_y0 = -2.0, log_y1 = 0.0;    // miss rate 0.01 .. 1

  double x(double fppi) const { return left + width * (std::log10(fppi) - log_x0) / (log_x1 - log_x0); }
  double y(double miss_rate) const {
    const double l = std::log10(std::max(miss_rate, std::pow(10.0, log_y0)));
    return top + height * (log_y1 - l) / (log_y1 - log_y0);
  }
};

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const char* subset_color(std::size_t i) {
  static constexpr std::array<const char*, 3> colors{"#1f4e9c", "#d08a10", "#2a8a3e"};
  return colors[i % colors.size()];
}

}  // namespace detail

/// Miss rate vs FPPI on log-log axes, one polyline per subset, log-average MR in the legend.
inline std::string render_plot_svg(const EvalReport& report) {
  const detail::PlotFrame f;
  using detail::px;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"400\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"520\" height=\"400\" fill=\"white\"/>\n";
  os << "<rect x=\"" << px(f.left) << "\" y=\"" << px(f.top) << "\" width=\"" << px(f.width) << "\" height=\""
     << px(f.height) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const double d : {0.01, 0.1, 1.0}) {
    os << "<line x1=\"" << px(f.x(d)) << "\" y1=\"" << px(f.top) << "\" x2=\"" << px(f.x(d)) << "\" y2=\""
       << px(f.top + f.height) << "\" stroke=\"#cccccc\"/>\n";
    os << "<text x=\"" << px(f.x(d)) << "\" y=\"" << px(f.top + f.height + 15) << "\" text-anchor=\"middle\">"
       << detail::fmt("%g", d) << "</text>\n";
  }
  for (const double m : {0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.64, 0.8, 1.0}) {
    os << "<line x1=\"" << px(f.left) << "\" y1=\"" << px(f.y(m)) << "\" x2=\"" << px(f.left + f.width) << "\" y2=\""
       << px(f.y(m)) << "\" stroke=\"#eeeeee\"/>\n";
    os << "<text x=\"" << px(f.left - 5) << "\" y=\"" << px(f.y(m) + 4) << "\" text-anchor=\"end\">"
       << detail::fmt("%g", m) << "</text>\n";
  }
  os << "<text x=\"" << px(f.left + f.width / 2) << "\" y=\"" << px(f.top + f.height + 32)
     << "\" text-anchor=\"middle\">false positives per image</text>\n";
  os << "<text x=\"16\" y=\"" << px(f.top + f.height / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << px(f.top + f.height / 2) << ")\">miss rate</text>\n";
  for (std::size_t i = 0; i < report.subsets.size(); ++i) {
    const auto& s = report.subsets[i];
    os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << detail::subset_color(i) << "\" points=\"";
    for (std::size_t k = 0; k < kFppiPoints; ++k) {
      os << (k ? " " : "") << px(f.x(s.curve.fppi_points[k])) << ',' << px(f.y(s.curve.miss_rates[k]));
    }
    os << "\"/>\n";
    const double ly = f.top + f.height - 12.0 - 16.0 * static_cast<double>(report.subsets.size() - 1 - i);
    const double lx = f.left + 12;
    os << "<line x1=\"" << px(lx) << "\" y1=\"" << px(ly) << "\" x2=\"" << px(lx + 20) << "\" y2=\"" << px(ly)
       << "\" stroke-width=\"2\" stroke=\"" << detail::subset_color(i) << "\"/>\n";
    os << "<text x=\"" << px(lx + 26) << "\" y=\"" << px(ly + 4) << "\">"
       << detail::fmt("%.2f%%", 100.0 * s.curve.log_avg_mr) << ' ' << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Inverse of format_report_csv.
inline EvalReport parse_report_csv(std::istream& in, const std::string& context) {
  EvalReport report;
  std::string line;
  if (!std::getline(in, line) || line != "subset,fppi,miss_rate,threshold,tp,fp,fn,frames") {
    throw DataError(context + ": not an evaluation report");
  }
  const auto number = [&](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError(context + ": bad number '" + s + "'");
  };
  const auto count = [&](const std::string& s) {
    const double v = number(s);
    if (!(v >= 0) || v != std::floor(v)) throw DataError(context + ": bad count '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  std::vector<std::size_t> rows;
  while (std::getline(in, line) && !line.empty()) {
    const auto f = iadn::detail::split(line, ',');
    if (f.size() != 8) throw DataError(context + ": expected 8 fields in '" + line + "'");
    if (report.subsets.empty() || report.subsets.back().name != f[0]) {
      report.subsets.push_back({f[0], {}});
      report.subsets.back().curve.fppi_points = reference_fppi();
      rows.push_back(0);
    }
    auto& c = report.subsets.back().curve;
    const std::size_t k = rows.back()++;
    if (k >= kFppiPoints) throw DataError(context + ": more than 9 rows for subset " + f[0]);
    auto& p = c.at_points[k];
    c.miss_rates[k] = p.miss_rate = number(f[2]);
    p.threshold = number(f[3]);
    p.tp = count(f[4]);
    p.fp = count(f[5]);
    p.fn = count(f[6]);
    c.frames = count(f[7]);
    c.ground_truths = p.tp + p.fn;
    p.fppi = static_cast<double>(p.fp) / static_cast<double>(std::max<std::size_t>(c.frames, 1));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] != kFppiPoints) throw DataError(context + ": subset " + report.subsets[i].name + " needs 9 rows");
  }
  if (!std::getline(in, line) || line != "subset,log_avg_mr") throw DataError(context + ": missing summary block");
  std::size_t summaries = 0;
  while (std::getline(in, line) && !line.empty()) {
    const auto f = iadn::detail::split(line, ',');
    if (f.size() != 2) throw DataError(context + ": bad summary row '" + line + "'");
    bool found = false;
    for (auto& s : report.subsets) {
      if (s.name == f[0]) {
        s.curve.log_avg_mr = number(f[1]);
        found = true;
      }
    }
    if (!found) throw DataError(context + ": summary for unknown subset " + f[0]);
    ++summaries;
  }
  if (summaries != report.subsets.size()) throw DataError(context + ": summary block incomplete");
  return report;
}

inline EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return parse_report_csv(in, path.string());
}

/// report.csv, curve_<subset>.csv per subset, and plot.svg.
inline std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written{out_dir / "report.csv"};
  detail::write_text(written.back(), format_report_csv(report));
  for (const auto& s : report.subsets) {
    written.push_back(out_dir / ("curve_" + s.name + ".csv"));
    detail::write_text(written.back(), format_curve_csv(s.curve));
  }
  written.push_back(out_dir / "plot.svg");
  detail::write_text(written.back(), render_plot_svg(report));
  return written;
}

}  // namespace iadn
