#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/nn/tensor.hpp"

namespace latfuse {

/// Shape signature of an encoder/decoder pair.
struct CodecDescriptor {
  int latent_channels = 3;
  int spatial_factor = 1;
  std::string name = "identity";

  void validate() const {
    if (latent_channels < 1) throw ValueError("codec latent_channels must be >= 1");
    if (spatial_factor < 1) throw ValueError("codec spatial_factor must be >= 1");
  }
  friend bool operator==(const CodecDescriptor&, const CodecDescriptor&) = default;
};

/// C-channel feature grid at 1/f of the image resolution, channel-planar.
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(int channels, int height, int width, float fill = 0.0f) : tensor_(1, channels, height, width, fill) {
    if (channels < 1 || height < 1 || width < 1) throw ShapeError("LatentGrid dimensions must be positive");
  }
  explicit LatentGrid(nn::Tensor<float> t) : tensor_(std::move(t)) {
    if (tensor_.n != 1) throw ShapeError("LatentGrid wraps a single-sample tensor");
  }

  int channels() const noexcept { return tensor_.c; }
  int height() const noexcept { return tensor_.h; }
  int width() const noexcept { return tensor_.w; }
  nn::AlignedVector<float>& values() noexcept { return tensor_.data; }
  const nn::AlignedVector<float>& values() const noexcept { return tensor_.data; }
  float at(int c, int y, int x) const noexcept { return tensor_.at(0, c, y, x); }
  float& at(int c, int y, int x) noexcept { return tensor_.at(0, c, y, x); }

  const nn::Tensor<float>& tensor() const noexcept { return tensor_; }
  nn::Tensor<float>& tensor() noexcept { return tensor_; }

  bool same_shape(const LatentGrid& o) const noexcept { return tensor_.same_shape(o.tensor_); }
  bool finite() const noexcept {
    for (float v : tensor_.data)
      if (!std::isfinite(v)) return false;
    return true;
  }
  std::string shape_string() const {
    return std::to_string(channels()) + "x" + std::to_string(height()) + "x" + std::to_string(width());
  }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  nn::Tensor<float> tensor_;
};

/// Interleaved HWC image → planar [1, C, H, W] tensor.
template <class T = float>
nn::Tensor<T> to_planar(const ImageBuffer& img) {
  nn::Tensor<T> t(1, img.channels(), img.height(), img.width());
  const auto v = img.values();
  const int ch = img.channels();
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < ch; ++c) t.data[c * img.pixel_count() + p] = static_cast<T>(v[p * ch + c]);
  return t;
}

/// Sample `b` of a planar tensor → interleaved image (no clamping).
template <class T>
ImageBuffer to_interleaved(const nn::Tensor<T>& t, int b = 0) {
  ImageBuffer img(t.h, t.w, t.c);
  auto v = img.values();
  const std::size_t plane = t.plane();
  for (int c = 0; c < t.c; ++c) {
    const T* src = t.channel(b, c);
    for (std::size_t p = 0; p < plane; ++p) v[p * t.c + c] = static_cast<float>(src[p]);
  }
  return img;
}

}  // namespace latfuse
