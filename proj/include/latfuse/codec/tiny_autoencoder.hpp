#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "latfuse/codec/codec.hpp"
#include "latfuse/nn/layers.hpp"
#include "latfuse/nn/weights_file.hpp"

namespace latfuse {

/// Adapter for a pretrained tiny autoencoder with the layer layout of the
/// public TAESD family (64-wide conv/ReLU blocks, three stride-2 stages).
///
/// The 16-channel, factor-8 profile is the one the fusion pipeline targets.
/// Weights come from a named-tensor file (see tools/convert_taesd.py) whose
/// tensor names follow the original `encoder.N...` / `decoder.N...` keys.
/// Without a weights file the codec is randomly initialized, which is only
/// useful for shape and plumbing tests.
class TinyAutoencoderCodec final : public Codec {
 public:
  static constexpr int kWidth = 64;

  explicit TinyAutoencoderCodec(int latent_channels = 16, std::uint64_t init_seed = 0)
      : desc_{latent_channels, 8, "taesd" + std::to_string(latent_channels)} {
    desc_.validate();
    build();
    Rng rng(init_seed);
    for (const Op& op : encoder_) init(op, rng);
    for (const Op& op : decoder_) init(op, rng);
  }

  static TinyAutoencoderCodec from_file(const std::filesystem::path& weights, int latent_channels = 16) {
    TinyAutoencoderCodec codec(latent_channels);
    nn::assign_from(codec.store_, nn::load_tensors(weights));
    return codec;
  }

  const CodecDescriptor& descriptor() const noexcept override { return desc_; }
  const nn::ParamStore<float>& params() const noexcept { return store_; }

  nn::Tensor<float> encode_batch(const nn::Tensor<float>& images) const override {
    return run(encoder_, images, nullptr);
  }

  nn::Tensor<float> decode_batch(const nn::Tensor<float>& latents) const override {
    nn::Tensor<float> out = run(decoder_, latents, nullptr);
    for (float& v : out.data) v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    return out;
  }

  nn::Tensor<float> decode_backward(const nn::Tensor<float>& latents, const nn::Tensor<float>& grad) const override {
    std::vector<OpCache> caches(decoder_.size());
    const nn::Tensor<float> raw = run(decoder_, latents, &caches);
    nn::Tensor<float> g = grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (raw.data[i] < 0.0f || raw.data[i] > 1.0f) g.data[i] = 0.0f;
    for (std::size_t i = decoder_.size(); i-- > 0;) g = input_grad(decoder_[i], caches[i], g);
    return g;
  }

 private:
  struct Conv {
    nn::Conv2d<float> conv;
  };
  struct Relu {};
  struct TanhClamp {};
  struct Upsample {};
  struct Block {
    nn::Conv2d<float> c0, c1, c2;
  };
  using Op = std::variant<Conv, Relu, TanhClamp, Upsample, Block>;

  struct OpCache {
    nn::Tensor<float> input;
    nn::Conv2d<float>::Cache c0, c1, c2;
    nn::Tensor<float> a0, a1, pre_out;  // block intermediates before ReLU
  };

  Conv conv(const std::string& name, int cin, int cout, int stride = 1, bool bias = true) {
    return Conv{nn::Conv2d<float>(store_, name, cin, cout, 3, stride, bias)};
  }
  Block block(const std::string& name) {
    return Block{nn::Conv2d<float>(store_, name + ".conv.0", kWidth, kWidth, 3),
                 nn::Conv2d<float>(store_, name + ".conv.2", kWidth, kWidth, 3),
                 nn::Conv2d<float>(store_, name + ".conv.4", kWidth, kWidth, 3)};
  }

  void build() {
    const int C = desc_.latent_channels;
    int i = 0;
    auto enc = [&] { return "encoder." + std::to_string(i++); };
    encoder_.push_back(conv(enc(), 3, kWidth));
    encoder_.push_back(block(enc()));
    for (int stage = 0; stage < 3; ++stage) {
      encoder_.push_back(conv(enc(), kWidth, kWidth, 2, false));
      for (int b = 0; b < 3; ++b) encoder_.push_back(block(enc()));
    }
    encoder_.push_back(conv(enc(), kWidth, C));

    i = 0;
    auto dec = [&] { return "decoder." + std::to_string(i++); };
    decoder_.push_back(TanhClamp{});
    ++i;
    decoder_.push_back(conv(dec(), C, kWidth));
    decoder_.push_back(Relu{});
    ++i;
    for (int stage = 0; stage < 3; ++stage) {
      for (int b = 0; b < 3; ++b) decoder_.push_back(block(dec()));
      decoder_.push_back(Upsample{});
      ++i;
      decoder_.push_back(conv(dec(), kWidth, kWidth, 1, false));
    }
    decoder_.push_back(block(dec()));
    decoder_.push_back(conv(dec(), kWidth, 3));
  }

  void init(const Op& op, Rng& rng) {
    if (const auto* c = std::get_if<Conv>(&op)) c->conv.init(store_, rng);
    if (const auto* b = std::get_if<Block>(&op)) {
      b->c0.init(store_, rng);
      b->c1.init(store_, rng);
      b->c2.init(store_, rng);
    }
  }

  static nn::Tensor<float> relu(nn::Tensor<float> x) {
    for (float& v : x.data) v = std::max(v, 0.0f);
    return x;
  }
  static nn::Tensor<float> relu_backward(const nn::Tensor<float>& x, nn::Tensor<float> g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data[i] <= 0.0f) g.data[i] = 0.0f;
    return g;
  }

  nn::Tensor<float> apply(const Op& op, const nn::Tensor<float>& x, OpCache* c) const {
    if (c) c->input = x;
    if (const auto* cv = std::get_if<Conv>(&op)) return cv->conv.forward(store_, x, c ? &c->c0 : nullptr);
    if (std::holds_alternative<Relu>(op)) return relu(x);
    if (std::holds_alternative<Upsample>(op)) return nn::upsample_nearest2(x);
    if (std::holds_alternative<TanhClamp>(op)) {
      nn::Tensor<float> y = x;
      for (float& v : y.data) v = std::tanh(v / 3.0f) * 3.0f;
      return y;
    }
    const auto& b = std::get<Block>(op);
    nn::Tensor<float> a0 = b.c0.forward(store_, x, c ? &c->c0 : nullptr);
    nn::Tensor<float> a1 = b.c1.forward(store_, relu(a0), c ? &c->c1 : nullptr);
    nn::Tensor<float> out = b.c2.forward(store_, relu(a1), c ? &c->c2 : nullptr);
    out += x;
    if (c) {
      c->a0 = std::move(a0);
      c->a1 = std::move(a1);
      c->pre_out = out;
    }
    return relu(std::move(out));
  }

  nn::Tensor<float> input_grad(const Op& op, const OpCache& c, const nn::Tensor<float>& g) const {
    if (const auto* cv = std::get_if<Conv>(&op)) return cv->conv.input_grad(store_, c.c0, g);
    if (std::holds_alternative<Relu>(op)) return relu_backward(c.input, g);
    if (std::holds_alternative<Upsample>(op)) return nn::upsample_nearest2_backward(g);
    if (std::holds_alternative<TanhClamp>(op)) {
      nn::Tensor<float> d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const float t = std::tanh(c.input.data[i] / 3.0f);
        d.data[i] *= 1.0f - t * t;
      }
      return d;
    }
    const auto& b = std::get<Block>(op);
    const nn::Tensor<float> d_out = relu_backward(c.pre_out, g);
    nn::Tensor<float> d = b.c2.input_grad(store_, c.c2, d_out);
    d = b.c1.input_grad(store_, c.c1, relu_backward(c.a1, d));
    d = b.c0.input_grad(store_, c.c0, relu_backward(c.a0, d));
    d += d_out;
    return d;
  }

  nn::Tensor<float> run(const std::vector<Op>& ops, const nn::Tensor<float>& x, std::vector<OpCache>* caches) const {
    nn::Tensor<float> h = x;
    for (std::size_t i = 0; i < ops.size(); ++i) h = apply(ops[i], h, caches ? &(*caches)[i] : nullptr);
    return h;
  }

  CodecDescriptor desc_;
  nn::ParamStore<float> store_;
  std::vector<Op> encoder_;
  std::vector<Op> decoder_;
};

}  // namespace latfuse
