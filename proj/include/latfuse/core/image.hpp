#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latfuse/core/error.hpp"

namespace latfuse {

/// Interleaved row-major float image, values normalized to [0,1].
///
/// Pixel (y, x) channel c lives at `(y * width + x) * channels + c`. Most of
/// the pipeline uses 3-channel RGB; single-channel buffers are used for masks,
/// weight maps and error maps.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int height, int width, int channels = 3, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels) {
    check_dims();
    values_.assign(size(), fill);
  }

  ImageBuffer(int height, int width, int channels, std::vector<float> values)
      : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    check_dims();
    if (values_.size() != size())
      throw ShapeError("ImageBuffer: value count " + std::to_string(values_.size()) +
                       " does not match " + shape_string());
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height_) * width_ * channels_;
  }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return values_.empty(); }

  float& at(int y, int x, int c = 0) { return values_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return values_[index(y, x, c)]; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool same_shape(const ImageBuffer& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool same_extent(const ImageBuffer& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_;
  }

  /// True when every value is finite and inside [0,1].
  bool in_unit_range() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
  }

  void clamp_unit() noexcept {
    for (float& v : values_) v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  /// Copy of the `h`×`w` window starting at (top, left).
  ImageBuffer crop(int top, int left, int h, int w) const {
    if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > height_ || left + w > width_)
      throw ShapeError("crop window out of bounds for " + shape_string());
    ImageBuffer out(h, w, channels_);
    const std::size_t row = static_cast<std::size_t>(w) * channels_;
    for (int y = 0; y < h; ++y)
      std::copy_n(values_.begin() + index(top + y, left, 0), row, out.values_.begin() + out.index(y, 0, 0));
    return out;
  }

  /// Reflection padding (edge pixel not repeated) to at least `h`×`w`.
  ImageBuffer pad_reflect(int h, int w) const {
    if (h < height_ || w < width_) throw ShapeError("pad_reflect target smaller than image");
    if (h == height_ && w == width_) return *this;
    ImageBuffer out(h, w, channels_);
    for (int y = 0; y < h; ++y) {
      const int sy = reflect(y, height_);
      for (int x = 0; x < w; ++x) {
        const int sx = reflect(x, width_);
        for (int c = 0; c < channels_; ++c) out.at(y, x, c) = at(sy, sx, c);
      }
    }
    return out;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  static int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  }

  void check_dims() const {
    if (height_ < 1 || width_ < 1 || channels_ < 1)
      throw ShapeError("ImageBuffer dimensions must be positive, got " + shape_string());
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

/// Per-pixel selection weights for a two-image blend; single channel in [0,1].
struct DecisionMask {
  ImageBuffer weights;

  DecisionMask() = default;
  explicit DecisionMask(ImageBuffer w) : weights(std::move(w)) {
    if (weights.channels() != 1) throw ShapeError("DecisionMask must be single-channel");
    if (!weights.in_unit_range()) throw ValueError("DecisionMask values must lie in [0,1]");
  }
  DecisionMask(int height, int width, float fill) : DecisionMask(ImageBuffer(height, width, 1, fill)) {}

  int height() const noexcept { return weights.height(); }
  int width() const noexcept { return weights.width(); }
};

inline constexpr int kMaxStackSize = 7;

/// Ordered, registered focus-bracketed images of one scene.
///
/// Order is whatever the caller supplied; nothing here sorts by distance.
class FocusStack {
 public:
  FocusStack() = default;

  FocusStack(std::vector<ImageBuffer> images, std::vector<double> focus_distances, bool registered = true)
      : images_(std::move(images)), focus_distances_(std::move(focus_distances)), registered_(registered) {
    if (images_.empty()) throw ValueError("FocusStack must contain at least one image");
    if (images_.size() > static_cast<std::size_t>(kMaxStackSize))
      throw ValueError("FocusStack holds at most 7 images, got " + std::to_string(images_.size()));
    if (focus_distances_.size() != images_.size())
      throw ValueError("FocusStack needs one focus distance per image");
    for (const auto& img : images_)
      if (!img.same_shape(images_.front()))
        throw ShapeError("FocusStack images must share dimensions: " + img.shape_string() + " vs " +
                         images_.front().shape_string());
    for (double d : focus_distances_)
      if (!(d > 0.0) || !std::isfinite(d)) throw ValueError("focus distances must be strictly positive");
  }

  /// Stack without known focus distances (e.g. user-supplied photos); distances default to 1 m.
  static FocusStack with_unit_distances(std::vector<ImageBuffer> images) {
    const std::size_t n = images.size();
    return FocusStack(std::move(images), std::vector<double>(n, 1.0));
  }

  std::size_t size() const noexcept { return images_.size(); }
  const ImageBuffer& operator[](std::size_t i) const { return images_.at(i); }
  const std::vector<ImageBuffer>& images() const noexcept { return images_; }
  const std::vector<double>& focus_distances() const noexcept { return focus_distances_; }
  bool registered() const noexcept { return registered_; }
  int height() const noexcept { return images_.empty() ? 0 : images_.front().height(); }
  int width() const noexcept { return images_.empty() ? 0 : images_.front().width(); }

  friend bool operator==(const FocusStack&, const FocusStack&) = default;

 private:
  std::vector<ImageBuffer> images_;
  std::vector<double> focus_distances_;
  bool registered_ = true;
};

/// Decision-mask blend `a·m + b·(1−m)` applied per pixel and channel.
inline ImageBuffer blend_with_mask(const ImageBuffer& a, const ImageBuffer& b, const DecisionMask& m) {
  if (!a.same_shape(b)) throw ShapeError("blend_with_mask: " + a.shape_string() + " vs " + b.shape_string());
  if (m.height() != a.height() || m.width() != a.width())
    throw ShapeError("blend_with_mask: mask " + m.weights.shape_string() + " vs image " + a.shape_string());
  ImageBuffer out(a.height(), a.width(), a.channels());
  const int ch = a.channels();
  const auto av = a.values();
  const auto bv = b.values();
  const auto mv = m.weights.values();
  auto ov = out.values();
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const float w = mv[p];
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = p * ch + c;
      ov[i] = av[i] * w + bv[i] * (1.0f - w);
    }
  }
  return out;
}

}  // namespace latfuse
