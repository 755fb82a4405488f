#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "bgpo/harness.hpp"

namespace bgpo {
namespace fs = std::filesystem;

double ChartLayout::px(double x) const {
  return margin + (x - x_min) / (x_max - x_min) * (width - 2.0 * margin);
}

double ChartLayout::py(double y) const {
  return height - margin - (y - y_min) * y_scale();
}

double ChartLayout::y_scale() const {
  return (height - 2.0 * margin) / (y_max - y_min);
}

ChartLayout layout_for(const std::vector<Series>& series) {
  ChartLayout l;
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.mean[i] - s.std[i]);
      y_hi = std::max(y_hi, s.mean[i] + s.std[i]);
    }
  }
  if (!std::isfinite(x_lo)) throw std::invalid_argument("nothing to plot");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) {
    y_lo -= 1.0;
    y_hi += 1.0;
  }
  l.x_min = x_lo;
  l.x_max = x_hi;
  l.y_min = y_lo;
  l.y_max = y_hi;
  return l;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title) {
  for (const auto& s : series) {
    if (s.x.size() != s.mean.size() || s.x.size() != s.std.size()) {
      throw std::invalid_argument("series '" + s.label + "' has mismatched columns");
    }
  }
  const ChartLayout l = layout_for(series);
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"14\">{4}</text>\n",
      l.width, l.height, l.margin, l.margin / 2.0, title);

  const double x0 = l.margin;
  const double x1 = l.width - l.margin;
  const double y0 = l.height - l.margin;
  const double y1 = l.margin;
  svg += fmt::format(
      "<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\" stroke=\"black\"/>\n",
      x0, y0, x1, y1);
  for (int i = 0; i <= 4; ++i) {
    const double xv = l.x_min + (l.x_max - l.x_min) * i / 4.0;
    const double yv = l.y_min + (l.y_max - l.y_min) * i / 4.0;
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" "
        "text-anchor=\"middle\">{:.4g}</text>\n",
        l.px(xv), y0 + 16.0, xv);
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" "
        "text-anchor=\"end\">{:.4g}</text>\n",
        x0 - 6.0, l.py(yv) + 3.0, yv);
  }
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
      "text-anchor=\"middle\">timesteps</text>\n",
      (x0 + x1) / 2.0, l.height - 12.0);

  double legend_y = l.margin + 12.0;
  for (const auto& s : series) {
    std::string upper;
    std::string lower;
    std::string line;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      upper += fmt::format("{:.6f},{:.6f} ", l.px(s.x[i]), l.py(s.mean[i] + s.std[i]));
      line += fmt::format("{:.6f},{:.6f} ", l.px(s.x[i]), l.py(s.mean[i]));
    }
    for (std::size_t i = s.x.size(); i-- > 0;) {
      lower += fmt::format("{:.6f},{:.6f} ", l.px(s.x[i]), l.py(s.mean[i] - s.std[i]));
    }
    svg += fmt::format(
        "<polygon class=\"band\" points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.2\" "
        "stroke=\"none\"/>\n",
        upper, lower, s.color);
    svg += fmt::format(
        "<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"{}\" "
        "stroke-width=\"1.5\"/>\n",
        line, s.color);
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "fill=\"{}\">{}</text>\n",
        x1 - 90.0, legend_y, s.color, s.label);
    legend_y += 14.0;
  }
  svg += "</svg>\n";
  return svg;
}

void plot_csv(const fs::path& csv, const fs::path& svg) {
  const CsvTable t = read_csv(csv);
  Series s;
  s.color = "#1f77b4";
  std::size_t x_col = 0;
  std::size_t mean_col = 0;
  std::size_t std_col = 0;
  if (t.schema == kRecordsSchema) {
    x_col = t.column("timesteps");
    mean_col = t.column("eval_return_mean");
    std_col = t.column("eval_return_std");
    s.label = "eval return";
  } else if (t.schema == kAggregateSchema) {
    x_col = t.column("grid_timesteps");
    mean_col = t.column("eval_mean");
    std_col = t.column("eval_std");
    s.label = "mean eval return";
  } else {
    throw std::runtime_error(csv.string() + ": unsupported schema '" + t.schema + "'");
  }
  for (const auto& row : t.rows) {
    s.x.push_back(row[x_col]);
    s.mean.push_back(row[mean_col]);
    s.std.push_back(row[std_col]);
  }
  const std::string text = render_svg({s}, csv.filename().string());
  std::ofstream out(svg);
  if (!out) throw std::runtime_error("cannot write " + svg.string());
  out << text;
}

}  // namespace bgpo
