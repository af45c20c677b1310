#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "latfuse/codec/latent.hpp"
#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/nn/tensor.hpp"

namespace latfuse {

/// Frozen image encoder/decoder.
///
/// Implementations work on planar batches; the non-virtual wrappers check
/// shapes. Nothing here mutates weights, so one instance may serve concurrent
/// callers. Encoding is deterministic (no sampling branch).
class Codec {
 public:
  virtual ~Codec() = default;

  virtual const CodecDescriptor& descriptor() const noexcept = 0;

  /// [N, 3, H, W] in [0,1] → [N, C, H/f, W/f].
  virtual nn::Tensor<float> encode_batch(const nn::Tensor<float>& images) const = 0;
  /// [N, C, h, w] → [N, 3, h·f, w·f], clamped to [0,1].
  virtual nn::Tensor<float> decode_batch(const nn::Tensor<float>& latents) const = 0;
  /// Vector-Jacobian product of decode_batch at `latents` (clamp included).
  virtual nn::Tensor<float> decode_backward(const nn::Tensor<float>& latents,
                                            const nn::Tensor<float>& grad_pixels) const = 0;

  LatentGrid encode(const ImageBuffer& image) const {
    check_image(image.height(), image.width(), image.channels());
    return LatentGrid(encode_batch(to_planar(image)));
  }

  ImageBuffer decode(const LatentGrid& latent) const {
    check_latent(latent.channels());
    return to_interleaved(decode_batch(latent.tensor()));
  }

  void check_image(int height, int width, int channels) const {
    const auto& d = descriptor();
    if (channels != 3) throw ShapeError("codec expects 3-channel images, got " + std::to_string(channels));
    if (height % d.spatial_factor != 0 || width % d.spatial_factor != 0)
      throw DivisibilityError("image " + std::to_string(height) + "x" + std::to_string(width) +
                              " is not divisible by codec factor " + std::to_string(d.spatial_factor) +
                              "; pad before encoding");
  }

  void check_latent(int channels) const {
    if (channels != descriptor().latent_channels)
      throw ShapeError("codec '" + descriptor().name + "' expects " + std::to_string(descriptor().latent_channels) +
                       " latent channels, got " + std::to_string(channels));
  }
};

/// Identity codec: C = 3, f = 1; the latent is the image itself.
///
/// Templated so that double-precision gradient checks can run through the
/// same decode path as training.
template <class T>
class BasicIdentityCodec {
 public:
  static CodecDescriptor make_descriptor() { return {3, 1, "identity"}; }

  nn::Tensor<T> encode_batch(const nn::Tensor<T>& images) const { return images; }

  nn::Tensor<T> decode_batch(const nn::Tensor<T>& latents) const {
    nn::Tensor<T> out = latents;
    for (T& v : out.data) v = std::isfinite(v) ? std::clamp(v, T(0), T(1)) : T(0);
    return out;
  }

  nn::Tensor<T> decode_backward(const nn::Tensor<T>& latents, const nn::Tensor<T>& grad) const {
    nn::Tensor<T> out = grad;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (latents.data[i] < T(0) || latents.data[i] > T(1)) out.data[i] = T(0);
    return out;
  }
};

class IdentityCodec final : public Codec {
 public:
  const CodecDescriptor& descriptor() const noexcept override { return desc_; }
  nn::Tensor<float> encode_batch(const nn::Tensor<float>& images) const override { return impl_.encode_batch(images); }
  nn::Tensor<float> decode_batch(const nn::Tensor<float>& latents) const override {
    return impl_.decode_batch(latents);
  }
  nn::Tensor<float> decode_backward(const nn::Tensor<float>& latents, const nn::Tensor<float>& grad) const override {
    return impl_.decode_backward(latents, grad);
  }

 private:
  CodecDescriptor desc_ = BasicIdentityCodec<float>::make_descriptor();
  BasicIdentityCodec<float> impl_;
};

/// Lossless space-to-depth codec: each f×f×3 block becomes 3·f² channels.
/// Exactly invertible, so it serves as an oracle for f > 1 padding paths.
class SpaceToDepthCodec final : public Codec {
 public:
  explicit SpaceToDepthCodec(int factor) : desc_{3 * factor * factor, factor, "space_to_depth"} { desc_.validate(); }

  const CodecDescriptor& descriptor() const noexcept override { return desc_; }

  nn::Tensor<float> encode_batch(const nn::Tensor<float>& x) const override {
    const int f = desc_.spatial_factor;
    nn::Tensor<float> out(x.n, desc_.latent_channels, x.h / f, x.w / f);
    for (int b = 0; b < x.n; ++b)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < x.h; ++y)
          for (int xx = 0; xx < x.w; ++xx)
            out.at(b, channel(c, y % f, xx % f), y / f, xx / f) = x.at(b, c, y, xx);
    return out;
  }

  nn::Tensor<float> decode_batch(const nn::Tensor<float>& z) const override {
    nn::Tensor<float> out = unshuffle(z);
    for (float& v : out.data) v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    return out;
  }

  nn::Tensor<float> decode_backward(const nn::Tensor<float>& z, const nn::Tensor<float>& grad) const override {
    const nn::Tensor<float> raw = unshuffle(z);
    nn::Tensor<float> g = grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (raw.data[i] < 0.0f || raw.data[i] > 1.0f) g.data[i] = 0.0f;
    return encode_batch(g);
  }

 private:
  int channel(int c, int dy, int dx) const noexcept {
    const int f = desc_.spatial_factor;
    return (c * f + dy) * f + dx;
  }

  nn::Tensor<float> unshuffle(const nn::Tensor<float>& z) const {
    const int f = desc_.spatial_factor;
    nn::Tensor<float> out(z.n, 3, z.h * f, z.w * f);
    for (int b = 0; b < z.n; ++b)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out.h; ++y)
          for (int x = 0; x < out.w; ++x) out.at(b, c, y, x) = z.at(b, channel(c, y % f, x % f), y / f, x / f);
    return out;
  }

  CodecDescriptor desc_;
};

/// |decode(encode(x)) − x| summary.
struct ReconstructionDiagnostic {
  double mean_abs_error = 0.0;
  double max_abs_error = 0.0;
  ImageBuffer error_map;  // same dims as the input
};

inline ReconstructionDiagnostic roundtrip_diagnostic(const Codec& codec, const ImageBuffer& image) {
  const ImageBuffer recon = codec.decode(codec.encode(image));
  ReconstructionDiagnostic d;
  d.error_map = ImageBuffer(image.height(), image.width(), image.channels());
  const auto a = image.values();
  const auto b = recon.values();
  auto e = d.error_map.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float err = std::fabs(a[i] - b[i]);
    e[i] = err;
    sum += err;
    d.max_abs_error = std::max(d.max_abs_error, static_cast<double>(err));
  }
  d.mean_abs_error = sum / static_cast<double>(a.size());
  return d;
}

}  // namespace latfuse
