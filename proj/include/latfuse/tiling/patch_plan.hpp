#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"

namespace latfuse {

struct PatchRect {
  int top = 0;
  int left = 0;
  int size = 0;

  friend bool operator==(const PatchRect&, const PatchRect&) = default;
};

/// Overlapping square patches covering an image. Neighbours overlap by P/4
/// (stride 3P/4) except the last start on each axis, clamped to dim − P.
struct PatchPlan {
  int image_height = 0;
  int image_width = 0;
  int patch_size = 0;
  std::vector<int> row_starts;
  std::vector<int> col_starts;
  std::vector<PatchRect> rects;  // row-major over (row_starts × col_starts)

  int overlap() const noexcept { return patch_size / 4; }
  int stride() const noexcept { return patch_size - overlap(); }

  std::optional<std::size_t> index_of(const PatchRect& r) const {
    const auto it = std::find(rects.begin(), rects.end(), r);
    if (it == rects.end()) return std::nullopt;
    return static_cast<std::size_t>(it - rects.begin());
  }
};

/// Starts along one axis: 0, s, 2s, … with the final start at extent − P.
inline std::vector<int> axis_starts(int extent, int patch) {
  const int stride = patch - patch / 4;
  std::vector<int> starts;
  for (int s = 0;; s += stride) {
    if (s + patch >= extent) {
      starts.push_back(extent - patch);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

inline PatchPlan plan_patches(int height, int width, int patch) {
  if (patch < 4 || patch % 4 != 0) throw ValueError("patch size must be a positive multiple of 4, got " + std::to_string(patch));
  if (height < patch || width < patch)
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) + " smaller than patch " +
                     std::to_string(patch) + "; pad first");
  PatchPlan plan;
  plan.image_height = height;
  plan.image_width = width;
  plan.patch_size = patch;
  plan.row_starts = axis_starts(height, patch);
  plan.col_starts = axis_starts(width, patch);
  for (int top : plan.row_starts)
    for (int left : plan.col_starts) plan.rects.push_back({top, left, patch});
  return plan;
}

namespace detail {

// Weight along one axis of the patch starting at starts[i]: a linear ramp over
// the part shared with the previous patch and a falling ramp over the part
// shared with the next one; 1 elsewhere (including image-border sides).
inline std::vector<float> axis_ramp(const std::vector<int>& starts, std::size_t i, int patch) {
  std::vector<float> w(patch, 1.0f);
  if (i > 0) {
    const int ov = starts[i - 1] + patch - starts[i];
    for (int t = 0; t < ov; ++t) w[t] *= (t + 0.5f) / static_cast<float>(ov);
  }
  if (i + 1 < starts.size()) {
    const int ov = starts[i] + patch - starts[i + 1];
    for (int t = 0; t < ov; ++t) w[patch - ov + t] *= 1.0f - (t + 0.5f) / static_cast<float>(ov);
  }
  return w;
}

}  // namespace detail

/// Separable gradient-alpha mask of `rect`, single channel, P×P.
inline ImageBuffer patch_weight_mask(const PatchRect& rect, const PatchPlan& plan) {
  if (!plan.index_of(rect)) throw ValueError("patch rect is not part of the plan");
  const auto ri = static_cast<std::size_t>(std::find(plan.row_starts.begin(), plan.row_starts.end(), rect.top) -
                                           plan.row_starts.begin());
  const auto ci = static_cast<std::size_t>(std::find(plan.col_starts.begin(), plan.col_starts.end(), rect.left) -
                                           plan.col_starts.begin());
  const auto ry = detail::axis_ramp(plan.row_starts, ri, plan.patch_size);
  const auto rx = detail::axis_ramp(plan.col_starts, ci, plan.patch_size);
  ImageBuffer mask(plan.patch_size, plan.patch_size, 1);
  for (int y = 0; y < plan.patch_size; ++y)
    for (int x = 0; x < plan.patch_size; ++x) mask.at(y, x) = ry[y] * rx[x];
  return mask;
}

}  // namespace latfuse
