#pragma once

#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/tiling/patch_plan.hpp"

namespace latfuse {

/// Weighted running sums for normalize-by-weight stitching.
class BlendAccumulator {
 public:
  BlendAccumulator(int height, int width, int channels)
      : value_sum_(static_cast<std::size_t>(height) * width * channels, 0.0),
        weight_sum_(static_cast<std::size_t>(height) * width, 0.0),
        height_(height),
        width_(width),
        channels_(channels) {}

  void add(const PatchRect& rect, const ImageBuffer& patch, const ImageBuffer& mask) {
    if (patch.height() != rect.size || patch.width() != rect.size || patch.channels() != channels_)
      throw ShapeError("patch " + patch.shape_string() + " does not fit rect of size " + std::to_string(rect.size));
    if (rect.top < 0 || rect.left < 0 || rect.top + rect.size > height_ || rect.left + rect.size > width_)
      throw ShapeError("patch rect outside accumulator");
    for (int y = 0; y < rect.size; ++y)
      for (int x = 0; x < rect.size; ++x) {
        const double w = mask.at(y, x);
        const std::size_t p = static_cast<std::size_t>(rect.top + y) * width_ + rect.left + x;
        weight_sum_[p] += w;
        for (int c = 0; c < channels_; ++c) value_sum_[p * channels_ + c] += w * patch.at(y, x, c);
      }
  }

  /// Adds another accumulator's sums (per-worker accumulators merged at the end).
  void merge(const BlendAccumulator& o) {
    if (o.height_ != height_ || o.width_ != width_ || o.channels_ != channels_)
      throw ShapeError("cannot merge accumulators of different shapes");
    for (std::size_t i = 0; i < value_sum_.size(); ++i) value_sum_[i] += o.value_sum_[i];
    for (std::size_t i = 0; i < weight_sum_.size(); ++i) weight_sum_[i] += o.weight_sum_[i];
  }

  ImageBuffer weight_map() const {
    ImageBuffer out(height_, width_, 1);
    auto v = out.values();
    for (std::size_t i = 0; i < weight_sum_.size(); ++i) v[i] = static_cast<float>(weight_sum_[i]);
    return out;
  }

  ImageBuffer resolve() const {
    ImageBuffer out(height_, width_, channels_);
    auto v = out.values();
    for (std::size_t p = 0; p < weight_sum_.size(); ++p) {
      if (!(weight_sum_[p] > 0.0)) throw Error("stitch: pixel " + std::to_string(p) + " has zero weight");
      for (int c = 0; c < channels_; ++c)
        v[p * channels_ + c] = static_cast<float>(value_sum_[p * channels_ + c] / weight_sum_[p]);
    }
    return out;
  }

 private:
  std::vector<double> value_sum_;
  std::vector<double> weight_sum_;
  int height_, width_, channels_;
};

/// Blends one P×P image per plan rect (in plan order) into an H×W image.
inline ImageBuffer stitch(const std::vector<ImageBuffer>& patches, const PatchPlan& plan) {
  if (patches.size() != plan.rects.size())
    throw ValueError("stitch: expected " + std::to_string(plan.rects.size()) + " patches, got " +
                     std::to_string(patches.size()));
  BlendAccumulator acc(plan.image_height, plan.image_width, patches.empty() ? 3 : patches.front().channels());
  for (std::size_t i = 0; i < plan.rects.size(); ++i)
    acc.add(plan.rects[i], patches[i], patch_weight_mask(plan.rects[i], plan));
  return acc.resolve();
}

/// Crops every plan rect out of `image`.
inline std::vector<ImageBuffer> crop_patches(const ImageBuffer& image, const PatchPlan& plan) {
  std::vector<ImageBuffer> out;
  out.reserve(plan.rects.size());
  for (const auto& r : plan.rects) out.push_back(image.crop(r.top, r.left, r.size, r.size));
  return out;
}

}  // namespace latfuse
