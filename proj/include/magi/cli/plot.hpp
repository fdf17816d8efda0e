#pragma once

#include "magi/trainer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace magi::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string xml_escape(const std::string& s) {
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

/// Metric columns of a metrics table (everything except env_step).
inline std::vector<std::string> plottable_metrics(const trainer::CsvTable& t) {
  std::vector<std::string> out;
  for (const auto& c : t.columns)
    if (c != "env_step") out.push_back(c);
  return out;
}

/// Series for `metric` from one table; x is env_step.
inline Series extract_series(const trainer::CsvTable& t, const std::string& metric, const std::string& name) {
  const int xi = t.column("env_step");
  const int yi = t.column(metric);
  if (yi < 0) throw trainer::CsvError(name + ":1: no column '" + metric + "'");
  Series s{name, {}, {}};
  for (const auto& row : t.rows) {
    s.x.push_back(row[static_cast<std::size_t>(xi)]);
    s.y.push_back(row[static_cast<std::size_t>(yi)]);
  }
  return s;
}

/// Line chart with one polyline per series. Non-finite points are skipped.
inline std::string render_svg(const std::string& title, const std::vector<Series>& series) {
  constexpr double W = 720, H = 440, left = 80, right = 180, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;

  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
                    "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(W) + "\" height=\"" + num(H) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" + xml_escape(title) + "</text>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text class=\"tick\" x=\"" + num(left - 6) + "\" y=\"" + num(top + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(y1) + "</text>\n";
  svg += "<text class=\"tick\" x=\"" + num(left - 6) + "\" y=\"" + num(top + ph) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(y0) + "</text>\n";
  svg += "<text class=\"tick\" x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + num(x0) + "</text>\n";
  svg += "<text class=\"tick\" x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(x1) + "</text>\n";
  svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">env_step</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % (sizeof colors / sizeof *colors)];
    std::string pts;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (!std::isfinite(s.x[j]) || !std::isfinite(s.y[j])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.x[j])) + "," + num(py(s.y[j]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + pw + 32) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text class=\"legend\" x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(s.name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace magi::cli
