#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/eval/metrics.hpp"

namespace latfuse::eval {

/// Smallest MSE between the GT patch and any input patch. High means no input
/// carries the in-focus content.
inline double difficulty_score(const ImageBuffer& gt_patch, std::span<const ImageBuffer> inputs) {
  if (inputs.empty()) throw ValueError("difficulty_score needs at least one input patch");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& in : inputs) best = std::min(best, mse(gt_patch, in));
  return best;
}

struct DifficultyBin {
  double threshold = 0.0;
  std::size_t patch_count = 0;
  double mean_metric = 0.0;  // NaN when the bin is empty
};

using PatchMetric = std::function<double(const ImageBuffer& fused, const ImageBuffer& gt)>;

struct PatchScore {
  int top = 0, left = 0;
  double difficulty = 0.0;
  double metric = 0.0;
};

/// Scores every disjoint patch of the image grid. Trailing rows and columns
/// that do not fill a whole patch are skipped.
inline std::vector<PatchScore> score_patches(const ImageBuffer& fused, const ImageBuffer& gt, const FocusStack& stack,
                                             int patch_size, const PatchMetric& metric) {
  if (!fused.same_shape(gt) || stack.height() != gt.height() || stack.width() != gt.width() ||
      stack[0].channels() != gt.channels())
    throw ShapeError("binned_report: fused, gt and stack must share dimensions");
  if (patch_size < 1 || patch_size > gt.height() || patch_size > gt.width())
    throw ValueError("difficulty patch size " + std::to_string(patch_size) + " exceeds image " + gt.shape_string());
  std::vector<PatchScore> out;
  for (int top = 0; top + patch_size <= gt.height(); top += patch_size)
    for (int left = 0; left + patch_size <= gt.width(); left += patch_size) {
      const ImageBuffer g = gt.crop(top, left, patch_size, patch_size);
      std::vector<ImageBuffer> ins;
      for (const auto& img : stack.images()) ins.push_back(img.crop(top, left, patch_size, patch_size));
      out.push_back({top, left, difficulty_score(g, ins), metric(fused.crop(top, left, patch_size, patch_size), g)});
    }
  return out;
}

/// Cumulative bins: the bin at threshold t holds every patch with score ≥ t.
inline std::vector<DifficultyBin> bin_scores(const std::vector<PatchScore>& scores,
                                             const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw ValueError("thresholds must be ascending");
  std::vector<DifficultyBin> bins;
  for (double t : thresholds) {
    DifficultyBin b{t, 0, 0.0};
    double sum = 0.0;
    for (const auto& s : scores)
      if (s.difficulty >= t) {
        ++b.patch_count;
        sum += s.metric;
      }
    b.mean_metric = b.patch_count ? sum / static_cast<double>(b.patch_count) : std::numeric_limits<double>::quiet_NaN();
    bins.push_back(b);
  }
  return bins;
}

inline std::vector<DifficultyBin> binned_report(const ImageBuffer& fused, const ImageBuffer& gt,
                                                const FocusStack& stack, int patch_size,
                                                const std::vector<double>& thresholds, const PatchMetric& metric) {
  return bin_scores(score_patches(fused, gt, stack, patch_size, metric), thresholds);
}

inline std::vector<DifficultyBin> binned_report(const ImageBuffer& fused, const ImageBuffer& gt,
                                                const FocusStack& stack, int patch_size,
                                                const std::vector<double>& thresholds) {
  return binned_report(fused, gt, stack, patch_size, thresholds,
                       [](const ImageBuffer& f, const ImageBuffer& g) { return mse(f, g); });
}

}  // namespace latfuse::eval
