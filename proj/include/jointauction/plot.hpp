#pragma once

// Minimal SVG line charts: categorical x axis, one polyline per series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jointauction/checkpoint.hpp"
#include "jointauction/experiment.hpp"

namespace jointauction {

struct LineChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> x_labels;
  std::map<std::string, std::vector<std::optional<double>>> series;  // aligned with x_labels
};

inline std::string render_svg(const LineChart& chart) {
  if (chart.x_labels.empty() || chart.series.empty()) throw Error("plot: no data to draw");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [name, ys] : chart.series) {
    if (ys.size() != chart.x_labels.size()) throw Error("plot: series '" + name + "' is misaligned");
    for (const auto& y : ys)
      if (y) {
        lo = std::min(lo, *y);
        hi = std::max(hi, *y);
      }
  }
  if (!std::isfinite(lo)) throw Error("plot: every series is empty");
  if (hi - lo < 1e-9) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  const std::size_t nx = chart.x_labels.size();
  auto px = [&](std::size_t i) { return L + (nx == 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(nx - 1)); };
  auto py = [&](double y) { return T + ph * (1.0 - (y - lo) / (hi - lo)); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::string s;
  char buf[512];
  auto add = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    s += buf;
  };
  add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\">\n", W, H);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  add("<text x=\"%.1f\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n", L + pw / 2, chart.title.c_str());
  add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", L, T + ph, L + pw, T + ph);
  add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", L, T, L, T + ph);
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", L, py(y), L + pw, py(y));
    add("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3f</text>\n", L - 6, py(y) + 4, y);
  }
  for (std::size_t i = 0; i < nx; ++i)
    add("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", px(i), T + ph + 18, chart.x_labels[i].c_str());
  add("<text x=\"16\" y=\"%.1f\" transform=\"rotate(-90 16 %.1f)\" text-anchor=\"middle\">%s</text>\n",
      T + ph / 2, T + ph / 2, chart.y_label.c_str());

  std::size_t ci = 0;
  for (const auto& [name, ys] : chart.series) {
    const char* color = colors[ci % 6];
    std::string points;
    for (std::size_t i = 0; i < nx; ++i) {
      if (!ys[i]) continue;
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(i), py(*ys[i]));
      points += buf;
      add("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n", px(i), py(*ys[i]), color);
    }
    add("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"%s\"/>\n", color, points.c_str());
    const double ly = T + 10 + 18.0 * static_cast<double>(ci);
    add("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>\n", L + pw + 12, ly, L + pw + 32, ly, color);
    add("<text x=\"%.1f\" y=\"%.1f\">%s</text>\n", L + pw + 38, ly + 4, name.c_str());
    ++ci;
  }
  s += "</svg>\n";
  return s;
}

/// Revenue per setting (x axis, in the given order) for every mechanism,
/// using the mean row of learned mechanisms and the single row of exact ones.
inline LineChart revenue_chart(const std::vector<ResultRow>& rows,
                               std::vector<std::string> settings, std::string title) {
  if (rows.empty()) throw Error("plot: empty report");
  if (settings.empty())
    for (const auto& r : rows)
      if (std::find(settings.begin(), settings.end(), r.setting) == settings.end())
        settings.push_back(r.setting);
  LineChart c;
  c.title = std::move(title);
  c.y_label = "revenue";
  c.x_labels = settings;
  for (const auto& r : rows) {
    const bool summary = r.run == "mean" || (!is_learned(r.mechanism) && r.run == "1");
    if (!summary) continue;
    const auto at = std::find(settings.begin(), settings.end(), r.setting);
    if (at == settings.end()) continue;
    auto& ys = c.series[r.mechanism];
    ys.resize(settings.size());
    ys[static_cast<std::size_t>(at - settings.begin())] = r.rev;
  }
  if (c.series.empty()) throw Error("plot: no rows match the requested settings");
  for (std::size_t i = 0; i < settings.size(); ++i)
    if (std::none_of(c.series.begin(), c.series.end(), [&](auto& kv) { return kv.second[i].has_value(); }))
      throw Error("plot: missing series for setting '" + settings[i] + "'");
  return c;
}

inline void write_svg(const std::filesystem::path& path, const LineChart& chart) {
  detail::atomic_write(path, render_svg(chart));
}

}  // namespace jointauction
