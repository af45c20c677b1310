#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "latfuse/core/fs.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/datagen/scene.hpp"
#include "latfuse/eval/benchmark.hpp"
#include "latfuse/eval/difficulty.hpp"
#include "latfuse/eval/metrics.hpp"

namespace latfuse::eval {

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return datagen::format_number(v);
}

}  // namespace detail

struct ImageMetrics {
  std::string id;
  std::vector<MetricResult> metrics;
};

/// One row per image, one column per metric.
inline std::string metrics_csv(const std::vector<ImageMetrics>& rows) {
  std::string out = "id";
  if (!rows.empty())
    for (const auto& m : rows.front().metrics) out += "," + m.name;
  out += "\n";
  for (const auto& r : rows) {
    out += detail::csv_field(r.id);
    for (const auto& m : r.metrics) out += "," + detail::num(m.value);
    out += "\n";
  }
  return out;
}

inline std::string bins_csv(const std::string& metric, const std::vector<DifficultyBin>& bins) {
  std::string out = "metric,threshold,patch_count,mean_metric\n";
  for (const auto& b : bins)
    out += metric + "," + detail::num(b.threshold) + "," + std::to_string(b.patch_count) + "," +
           detail::num(b.mean_metric) + "\n";
  return out;
}

inline std::string throughput_csv(const BenchmarkReport& r) {
  std::string out =
      "method_id,n_inputs,images_per_second,spread,trials,warmup,patch_resolution,hardware_id,hardware_threads\n";
  for (const auto& row : r.rows)
    out += detail::csv_field(row.method_id) + "," + std::to_string(row.n_inputs) + "," +
           detail::num(row.images_per_second) + "," + detail::num(row.spread) + "," + std::to_string(row.trials) +
           "," + std::to_string(r.environment.warmup) + "," + std::to_string(row.patch_resolution) + "," +
           detail::csv_field(r.environment.hardware_id) + "," + std::to_string(r.environment.hardware_threads) + "\n";
  return out;
}

/// Table of per-method metric means with direction markers (↑ higher is
/// better, ↓ lower is better). Columns follow the first method's metrics.
inline std::string aggregate_table(const std::vector<std::pair<std::string, std::vector<ImageMetrics>>>& methods) {
  if (methods.empty() || methods.front().second.empty()) return "";
  const auto& cols = methods.front().second.front().metrics;
  std::string out = "| method |";
  for (const auto& m : cols) out += " " + m.name + (m.higher_is_better ? " ↑" : " ↓") + " |";
  out += "\n|---|";
  for (std::size_t k = 0; k < cols.size(); ++k) out += "---|";
  out += "\n";
  for (const auto& [name, rows] : methods) {
    out += "| " + name + " |";
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double sum = 0.0;
      for (const auto& r : rows) sum += r.metrics.at(k).value;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.6g |", rows.empty() ? 0.0 : sum / static_cast<double>(rows.size()));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

struct PlotSeries {
  std::vector<double> x, y;
  std::vector<double> size;  // marker radius in px per point; empty → 3
  std::array<float, 3> color = {0.1f, 0.3f, 0.8f};
};

/// Minimal line/marker chart on a white canvas with axes through the data
/// minima. Intended for quick visual checks; it draws no text.
inline ImageBuffer render_plot(const std::vector<PlotSeries>& series, int width = 480, int height = 320) {
  ImageBuffer img(height, width, 3, 1.0f);
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (x0 > x1) return img;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const int m = 24;
  auto px = [&](double x) { return m + (x - x0) / (x1 - x0) * (width - 2 * m); };
  auto py = [&](double y) { return height - m - (y - y0) / (y1 - y0) * (height - 2 * m); };
  auto dot = [&](double cx, double cy, double r, const std::array<float, 3>& col) {
    for (int y = static_cast<int>(cy - r); y <= static_cast<int>(cy + r); ++y)
      for (int x = static_cast<int>(cx - r); x <= static_cast<int>(cx + r); ++x)
        if (y >= 0 && y < height && x >= 0 && x < width && (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
  };
  for (int x = m; x < width - m; ++x) img.at(height - m, x, 0) = img.at(height - m, x, 1) = img.at(height - m, x, 2) = 0.f;
  for (int y = m; y <= height - m; ++y) img.at(y, m, 0) = img.at(y, m, 1) = img.at(y, m, 2) = 0.f;
  for (const auto& s : series) {
    for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
      const double ax = px(s.x[i]), ay = py(s.y[i]), bx = px(s.x[i + 1]), by = py(s.y[i + 1]);
      const int steps = static_cast<int>(std::max(std::fabs(bx - ax), std::fabs(by - ay))) + 1;
      for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        dot(ax + t * (bx - ax), ay + t * (by - ay), 0.8, s.color);
      }
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) dot(px(s.x[i]), py(s.y[i]), s.size.empty() ? 3.0 : s.size[i], s.color);
  }
  return img;
}

/// Fig. 4 layout: mean metric against threshold, marker area tracking patch count.
inline ImageBuffer plot_bins(const std::vector<DifficultyBin>& bins) {
  PlotSeries s;
  std::size_t most = 1;
  for (const auto& b : bins) most = std::max(most, b.patch_count);
  for (const auto& b : bins) {
    s.x.push_back(b.threshold);
    s.y.push_back(b.mean_metric);
    s.size.push_back(2.0 + 8.0 * std::sqrt(static_cast<double>(b.patch_count) / static_cast<double>(most)));
  }
  return render_plot({s});
}

/// Fig. 5 layout: images per second against input count, one line per method.
inline ImageBuffer plot_throughput(const BenchmarkReport& r) {
  std::map<std::string, PlotSeries> by_method;
  const std::array<std::array<float, 3>, 4> palette = {
      {{0.1f, 0.3f, 0.8f}, {0.8f, 0.2f, 0.1f}, {0.1f, 0.6f, 0.2f}, {0.5f, 0.2f, 0.6f}}};
  for (const auto& row : r.rows) {
    auto& s = by_method[row.method_id];
    s.x.push_back(row.n_inputs);
    s.y.push_back(row.images_per_second);
  }
  std::vector<PlotSeries> all;
  for (auto& [id, s] : by_method) {
    s.color = palette[all.size() % palette.size()];
    all.push_back(s);
  }
  return render_plot(all);
}

}  // namespace latfuse::eval
