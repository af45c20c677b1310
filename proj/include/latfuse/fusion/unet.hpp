#pragma once

#include <array>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/random.hpp"
#include "latfuse/nn/layers.hpp"
#include "latfuse/nn/params.hpp"
#include "latfuse/nn/tensor.hpp"

namespace latfuse {

inline constexpr int kFusionSlots = 7;
inline constexpr int kUNetDepth = 3;

struct FusionNetConfig {
  int input_slots = kFusionSlots;
  int latent_channels = 3;
  int base_width = 32;
  /// Width multiplier of each resolution level, finest first.
  std::array<int, kUNetDepth> channel_mult = {1, 2, 2};
  int norm_groups = 8;
  bool mid_attention = true;
  /// Add the mean of the input slots to the network output.
  bool residual_mean = false;
  std::uint64_t init_seed = 0;

  int input_channels() const noexcept { return input_slots * latent_channels; }
  int width(int level) const noexcept { return base_width * channel_mult[level]; }

  void validate() const {
    if (input_slots != kFusionSlots) throw ValueError("fusion network takes exactly 7 input slots");
    if (latent_channels < 1) throw ValueError("latent_channels must be >= 1");
    if (base_width < 1) throw ValueError("base_width must be >= 1");
    for (int m : channel_mult)
      if (m < 1) throw ValueError("channel multipliers must be >= 1");
    if (norm_groups < 1) throw ValueError("norm_groups must be >= 1");
  }

  friend bool operator==(const FusionNetConfig&, const FusionNetConfig&) = default;
};

/// Fusion U-Net over channel-concatenated latents.
///
/// stem conv → 3 × (residual block, stride-2 conv) → 2 × (residual block +
/// self-attention) → 3 × (nearest upsample + conv, skip concat, residual
/// block) → GN/SiLU/conv head. The head is zero-initialized.
template <class T>
class FusionNet {
 public:
  struct Cache {
    nn::Tensor<T> input;
    typename nn::Conv2d<T>::Cache stem;
    std::array<typename nn::ResBlock<T>::Cache, kUNetDepth> enc;
    std::array<typename nn::Conv2d<T>::Cache, kUNetDepth> down;
    std::array<typename nn::ResBlock<T>::Cache, 2> mid;
    std::array<typename nn::SelfAttention<T>::Cache, 2> attn;
    std::array<typename nn::Conv2d<T>::Cache, kUNetDepth> up;
    std::array<typename nn::ResBlock<T>::Cache, kUNetDepth> dec;
    std::array<int, kUNetDepth> up_channels{};
    typename nn::GroupNorm<T>::Cache head_norm;
    nn::Tensor<T> head_pre;
    typename nn::Conv2d<T>::Cache head;
  };

  explicit FusionNet(FusionNetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int g = cfg_.norm_groups;
    stem_ = nn::Conv2d<T>(ps_, "stem", cfg_.input_channels(), cfg_.width(0), 3);
    int cur = cfg_.width(0);
    for (int l = 0; l < kUNetDepth; ++l) {
      const std::string n = "enc" + std::to_string(l);
      enc_[l] = nn::ResBlock<T>(ps_, n + ".res", cur, cfg_.width(l), g);
      cur = cfg_.width(l);
      down_[l] = nn::Conv2d<T>(ps_, n + ".down", cur, cur, 3, 2);
    }
    for (int m = 0; m < 2; ++m) {
      const std::string n = "mid" + std::to_string(m);
      mid_[m] = nn::ResBlock<T>(ps_, n + ".res", cur, cur, g);
      if (cfg_.mid_attention) attn_[m] = nn::SelfAttention<T>(ps_, n + ".attn", cur, g);
    }
    for (int l = kUNetDepth - 1; l >= 0; --l) {
      const std::string n = "dec" + std::to_string(l);
      up_[l] = nn::Conv2d<T>(ps_, n + ".up", cur, cur, 3);
      dec_[l] = nn::ResBlock<T>(ps_, n + ".res", cur + cfg_.width(l), cfg_.width(l), g);
      cur = cfg_.width(l);
    }
    head_norm_ = nn::GroupNorm<T>(ps_, "head.norm", cur, nn::ResBlock<T>::fit_groups(cur, g));
    head_ = nn::Conv2d<T>(ps_, "head.conv", cur, cfg_.latent_channels, 3);
    initialize(cfg_.init_seed);
  }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    stem_.init(ps_, rng);
    for (int l = 0; l < kUNetDepth; ++l) {
      enc_[l].init(ps_, rng);
      down_[l].init(ps_, rng);
      up_[l].init(ps_, rng);
      dec_[l].init(ps_, rng);
    }
    for (int m = 0; m < 2; ++m) {
      mid_[m].init(ps_, rng);
      if (cfg_.mid_attention) attn_[m].init(ps_, rng);
    }
    head_norm_.init(ps_);
    head_.zero(ps_);
  }

  const FusionNetConfig& config() const noexcept { return cfg_; }
  nn::ParamStore<T>& params() noexcept { return ps_; }
  const nn::ParamStore<T>& params() const noexcept { return ps_; }
  const nn::Conv2d<T>& head() const noexcept { return head_; }

  /// [N, 7·C, h, w] → [N, C, h, w]; h and w must be divisible by 8.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, Cache* c = nullptr) const {
    check_input(x);
    nn::Tensor<T> h = stem_.forward(ps_, x, c ? &c->stem : nullptr);
    std::array<nn::Tensor<T>, kUNetDepth> skips;
    for (int l = 0; l < kUNetDepth; ++l) {
      h = enc_[l].forward(ps_, h, c ? &c->enc[l] : nullptr);
      skips[l] = h;
      h = down_[l].forward(ps_, h, c ? &c->down[l] : nullptr);
    }
    for (int m = 0; m < 2; ++m) {
      h = mid_[m].forward(ps_, h, c ? &c->mid[m] : nullptr);
      if (cfg_.mid_attention) h = attn_[m].forward(ps_, h, c ? &c->attn[m] : nullptr);
    }
    for (int l = kUNetDepth - 1; l >= 0; --l) {
      h = up_[l].forward(ps_, nn::upsample_nearest2(h), c ? &c->up[l] : nullptr);
      if (c) c->up_channels[l] = h.c;
      h = dec_[l].forward(ps_, nn::concat_channels(h, skips[l]), c ? &c->dec[l] : nullptr);
    }
    nn::Tensor<T> pre = head_norm_.forward(ps_, h, c ? &c->head_norm : nullptr);
    nn::Tensor<T> out = head_.forward(ps_, nn::silu(pre), c ? &c->head : nullptr);
    if (cfg_.residual_mean) add_slot_mean(x, out);
    if (c) {
      c->input = x;
      c->head_pre = std::move(pre);
    }
    return out;
  }

  /// Accumulates parameter gradients for dL/d(output) = `dy`.
  void backward(const Cache& c, const nn::Tensor<T>& dy) {
    nn::Tensor<T> g = head_.backward(ps_, c.head, dy);
    g = head_norm_.backward(ps_, c.head_norm, nn::silu_backward(c.head_pre, g));
    std::array<nn::Tensor<T>, kUNetDepth> skip_grads;
    for (int l = 0; l < kUNetDepth; ++l) {
      g = dec_[l].backward(ps_, c.dec[l], g);
      nn::Tensor<T> g_up;
      nn::split_channels(g, c.up_channels[l], g_up, skip_grads[l]);
      g = nn::upsample_nearest2_backward(up_[l].backward(ps_, c.up[l], g_up));
    }
    for (int m = 1; m >= 0; --m) {
      if (cfg_.mid_attention) g = attn_[m].backward(ps_, c.attn[m], g);
      g = mid_[m].backward(ps_, c.mid[m], g);
    }
    for (int l = kUNetDepth - 1; l >= 0; --l) {
      g = down_[l].backward(ps_, c.down[l], g);
      g += skip_grads[l];
      g = enc_[l].backward(ps_, c.enc[l], g);
    }
    stem_.backward(ps_, c.stem, g, /*need_dx=*/false);
  }

 private:
  void check_input(const nn::Tensor<T>& x) const {
    if (x.c != cfg_.input_channels())
      throw ShapeError("fusion net expects " + std::to_string(cfg_.input_channels()) + " input channels, got " +
                       x.shape_string());
    if (x.h % 8 != 0 || x.w % 8 != 0)
      throw ShapeError("fusion net latent size must be divisible by 8, got " + x.shape_string());
  }

  void add_slot_mean(const nn::Tensor<T>& x, nn::Tensor<T>& out) const {
    const int C = cfg_.latent_channels;
    const T inv = T(1) / T(cfg_.input_slots);
    for (int b = 0; b < x.n; ++b)
      for (int s = 0; s < cfg_.input_slots; ++s)
        for (int ch = 0; ch < C; ++ch) {
          const T* src = x.channel(b, s * C + ch);
          T* dst = out.channel(b, ch);
          for (std::size_t i = 0; i < x.plane(); ++i) dst[i] += src[i] * inv;
        }
  }

  FusionNetConfig cfg_;
  nn::ParamStore<T> ps_;
  nn::Conv2d<T> stem_;
  std::array<nn::ResBlock<T>, kUNetDepth> enc_;
  std::array<nn::Conv2d<T>, kUNetDepth> down_;
  std::array<nn::ResBlock<T>, 2> mid_;
  std::array<nn::SelfAttention<T>, 2> attn_;
  std::array<nn::Conv2d<T>, kUNetDepth> up_;
  std::array<nn::ResBlock<T>, kUNetDepth> dec_;
  nn::GroupNorm<T> head_norm_;
  nn::Conv2d<T> head_;
};

}  // namespace latfuse
