#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "toolcua/common.hpp"

namespace toolcua {

// A numeric table read from a headed CSV, columns keyed by header name.
struct NumericTable {
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> values;
};

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

inline NumericTable parse_numeric_csv(const std::string& text) {
  NumericTable t;
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("csv: missing header");
  t.columns = split_csv_row(lines.front());
  for (const auto& c : t.columns) t.values[c];
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    const auto cells = split_csv_row(lines[r]);
    if (cells.size() != t.columns.size()) {
      throw ParseError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) + " cells");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
        t.values[t.columns[c]].push_back(v);
      } catch (const std::exception&) {
        throw ParseError("csv: non-numeric cell '" + cells[c] + "' in row " + std::to_string(r + 1));
      }
    }
  }
  return t;
}

struct PlotSeries {
  std::string label;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label = "iteration";
  std::string y_label;
  std::vector<double> x;
  std::vector<PlotSeries> series;
  int width = 640;
  int height = 400;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

// Static SVG line chart. Output depends only on the inputs, so plots are
// byte-stable across runs.
inline std::string render_svg(const PlotSpec& spec) {
  if (spec.x.empty()) throw std::invalid_argument("plot: no data points");
  for (const auto& s : spec.series) {
    if (s.y.size() != spec.x.size()) throw std::invalid_argument("plot: series '" + s.label + "' length mismatch");
  }
  const double left = 64, right = 16, top = 36, bottom = 48;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;

  double x0 = *std::min_element(spec.x.begin(), spec.x.end());
  double x1 = *std::max_element(spec.x.begin(), spec.x.end());
  double y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : spec.series) {
    for (double v : s.y) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = (y1 - y0) * 0.05;
  y0 -= pad;
  y1 += pad;

  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
         std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt_px(spec.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::xml_escape(spec.title) + "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    const double yp = py(yv);
    svg += "<line x1=\"" + detail::fmt_px(left) + "\" y1=\"" + detail::fmt_px(yp) + "\" x2=\"" +
           detail::fmt_px(left + pw) + "\" y2=\"" + detail::fmt_px(yp) + "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + detail::fmt_px(left - 6) + "\" y=\"" + detail::fmt_px(yp + 4) +
           "\" text-anchor=\"end\">" + detail::fmt_num(yv) + "</text>\n";
    const double xv = x0 + (x1 - x0) * i / 4.0;
    svg += "<text x=\"" + detail::fmt_px(px(xv)) + "\" y=\"" + detail::fmt_px(top + ph + 18) +
           "\" text-anchor=\"middle\">" + detail::fmt_num(xv) + "</text>\n";
  }
  svg += "<rect x=\"" + detail::fmt_px(left) + "\" y=\"" + detail::fmt_px(top) + "\" width=\"" + detail::fmt_px(pw) +
         "\" height=\"" + detail::fmt_px(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg += "<text x=\"" + detail::fmt_px(left + pw / 2) + "\" y=\"" + detail::fmt_px(spec.height - 10.0) +
         "\" text-anchor=\"middle\">" + detail::xml_escape(spec.x_label) + "</text>\n";
  svg += "<text transform=\"translate(16," + detail::fmt_px(top + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + detail::xml_escape(spec.y_label) + "</text>\n";

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& series = spec.series[s];
    std::string points;
    for (std::size_t i = 0; i < spec.x.size(); ++i) {
      if (i) points.push_back(' ');
      points += detail::fmt_px(px(spec.x[i])) + "," + detail::fmt_px(py(series.y[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + series.color + "\" stroke-width=\"1.5\" points=\"" + points +
           "\"/>\n";
    const double ly = top + 14 + 16.0 * static_cast<double>(s);
    svg += "<text x=\"" + detail::fmt_px(left + pw - 8) + "\" y=\"" + detail::fmt_px(ly) +
           "\" text-anchor=\"end\" fill=\"" + series.color + "\">" + detail::xml_escape(series.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// One chart per tracked quantity of a training-curve CSV, keyed by file stem.
// Extra CSVs (e.g. an ablation run) are overlaid as additional series.
inline std::map<std::string, std::string> plot_training_curves(
    const std::vector<std::pair<std::string, NumericTable>>& runs) {
  if (runs.empty()) throw std::invalid_argument("plot: no runs");
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  static const std::vector<std::pair<std::string, std::string>> kCharts = {
      {"accuracy", "Accuracy"},           {"tir", "Tool invocation rate"},
      {"mean_steps", "Trajectory steps"}, {"mean_tool_calls", "Tool calls per episode"},
      {"mean_reward", "Mean reward"}};
  std::map<std::string, std::string> out;
  for (const auto& [column, title] : kCharts) {
    PlotSpec spec;
    spec.title = title;
    spec.y_label = column;
    bool any = false;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& table = runs[r].second;
      auto ys = table.values.find(column);
      auto xs = table.values.find("iteration");
      if (ys == table.values.end() || xs == table.values.end()) continue;
      if (!any) spec.x = xs->second;
      if (xs->second != spec.x) throw std::invalid_argument("plot: runs disagree on iterations");
      spec.series.push_back({runs[r].first, ys->second, kColors[r % 4]});
      any = true;
    }
    if (any) out[column] = render_svg(spec);
  }
  if (out.empty()) throw ParseError("plot: no known curve columns in input");
  return out;
}

}  // namespace toolcua
