#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "latfuse/codec/codec.hpp"
#include "latfuse/codec/latent.hpp"
#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/core/random.hpp"
#include "latfuse/fusion/stack.hpp"
#include "latfuse/fusion/unet.hpp"
#include "latfuse/nn/optim.hpp"

namespace latfuse {

struct TrainConfig {
  int patch_size = 64;
  int global_batch = 8;
  long long steps = 2000;
  double learning_rate = 1e-4;
  double ema_decay = 0.999;
  double pixel_loss_weight = 1.0;
  bool permute_slots = true;
  std::uint64_t seed = 0;
  int log_every = 10;

  void validate(int spatial_factor) const {
    if (patch_size < 8 || global_batch < 1 || steps < 1 || log_every < 1)
      throw ValueError("train config counts must be positive (patch_size >= 8)");
    if (patch_size % spatial_factor != 0)
      throw ValueError("patch_size must be divisible by the codec factor " + std::to_string(spatial_factor));
    if ((patch_size / spatial_factor) % 8 != 0)
      throw ValueError("patch_size / codec factor must be divisible by 8 (three U-Net halvings)");
    if (!(learning_rate >= 0.0)) throw ValueError("learning_rate must be >= 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ValueError("ema_decay must lie in [0, 1)");
    if (!(pixel_loss_weight >= 0.0)) throw ValueError("pixel_loss_weight must be >= 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One training example: a registered focus stack and its all-in-focus target.
struct TrainingPair {
  FocusStack stack;
  ImageBuffer ground_truth;
};

/// Encoded minibatch ready for the network.
template <class T>
struct EncodedBatch {
  nn::Tensor<T> inputs;         // [N, 7·C, h, w]
  nn::Tensor<T> target_latent;  // [N, C, h, w]
  nn::Tensor<T> target_pixels;  // [N, 3, H, W]
};

template <class T>
struct LossTerms {
  T total = 0;
  T latent = 0;
  T pixel = 0;
};

/// L1(fused, target latent) + λ·L1(decode(fused), target pixels).
///
/// When `cache`-driven gradients are requested, dL/d(fused) is back-propagated
/// through the network and accumulated into its gradient buffer.
template <class T, class CodecT>
LossTerms<T> fusion_loss(FusionNet<T>& net, const EncodedBatch<T>& batch, const CodecT& codec, double pixel_weight,
                         bool accumulate_grad) {
  typename FusionNet<T>::Cache cache;
  const nn::Tensor<T> fused = net.forward(batch.inputs, accumulate_grad ? &cache : nullptr);
  if (!fused.same_shape(batch.target_latent))
    throw ShapeError("fused latent " + fused.shape_string() + " vs target " + batch.target_latent.shape_string());
  const nn::Tensor<T> decoded = codec.decode_batch(fused);
  if (!decoded.same_shape(batch.target_pixels))
    throw ShapeError("decoded " + decoded.shape_string() + " vs target " + batch.target_pixels.shape_string());

  auto sgn = [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); };
  LossTerms<T> terms;
  nn::Tensor<T> d_fused(fused.n, fused.c, fused.h, fused.w);
  nn::Tensor<T> d_pix(decoded.n, decoded.c, decoded.h, decoded.w);
  const T inv_l = T(1) / static_cast<T>(fused.size());
  const T inv_p = T(1) / static_cast<T>(decoded.size());
  double sum_l = 0.0, sum_p = 0.0;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const T d = fused.data[i] - batch.target_latent.data[i];
    sum_l += std::fabs(static_cast<double>(d));
    d_fused.data[i] = sgn(d) * inv_l;
  }
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    const T d = decoded.data[i] - batch.target_pixels.data[i];
    sum_p += std::fabs(static_cast<double>(d));
    d_pix.data[i] = sgn(d) * inv_p * static_cast<T>(pixel_weight);
  }
  terms.latent = static_cast<T>(sum_l / fused.size());
  terms.pixel = static_cast<T>(sum_p / decoded.size());
  terms.total = terms.latent + static_cast<T>(pixel_weight) * terms.pixel;
  if (accumulate_grad) {
    if (pixel_weight != 0.0) d_fused += codec.decode_backward(fused, d_pix);
    net.backward(cache, d_fused);
  }
  return terms;
}

/// Live weights, their exponential moving average, optimizer state and RNG.
template <class T>
struct TrainState {
  FusionNet<T> net;
  std::vector<T> ema_params;
  long long step = 0;
  nn::Adam<T> optimizer;
  Rng rng;
  TrainConfig config;

  TrainState(FusionNetConfig net_cfg, TrainConfig train_cfg)
      : net(net_cfg),
        ema_params(net.params().values().begin(), net.params().values().end()),
        optimizer(net.params().count(), {train_cfg.learning_rate}),
        rng(derive_seed(train_cfg.seed, 1)),
        config(train_cfg) {}

  /// Network carrying the EMA weights, for inference.
  FusionNet<T> ema_net() const {
    FusionNet<T> out = net;
    out.params().set_values(ema_params);
    return out;
  }
};

/// Stacks the 7-slot inputs and targets of `pairs` (already patch-sized) and encodes them.
inline EncodedBatch<float> encode_batch(const std::vector<TrainingPair>& pairs, const Codec& codec) {
  if (pairs.empty()) throw ValueError("empty training batch");
  const int H = pairs.front().ground_truth.height(), W = pairs.front().ground_truth.width();
  codec.check_image(H, W, 3);
  const int n = static_cast<int>(pairs.size());
  nn::Tensor<float> slots(n * kFusionSlots, 3, H, W);
  nn::Tensor<float> gts(n, 3, H, W);
  for (int b = 0; b < n; ++b) {
    const auto& p = pairs[b];
    if (p.stack.height() != H || p.stack.width() != W || !p.ground_truth.same_shape(pairs.front().ground_truth))
      throw ShapeError("all training patches must share one size");
    const auto order = padding_order(p.stack.size());
    for (int s = 0; s < kFusionSlots; ++s) {
      const nn::Tensor<float> t = to_planar(p.stack[order[s]]);
      std::copy(t.data.begin(), t.data.end(), slots.sample(b * kFusionSlots + s));
    }
    const nn::Tensor<float> g = to_planar(p.ground_truth);
    std::copy(g.data.begin(), g.data.end(), gts.sample(b));
  }
  EncodedBatch<float> out;
  // [N·7, C, h, w] is laid out exactly like [N, 7·C, h, w].
  out.inputs = codec.encode_batch(slots);
  out.inputs.n = n;
  out.inputs.c *= kFusionSlots;
  out.target_latent = codec.encode_batch(gts);
  out.target_pixels = std::move(gts);
  return out;
}

/// One optimizer step. On a non-finite loss nothing is updated and
/// DivergenceError is thrown.
template <class T, class CodecT>
LossTerms<T> train_step_encoded(TrainState<T>& state, const EncodedBatch<T>& batch, const CodecT& codec) {
  auto& ps = state.net.params();
  ps.zero_grad();
  const LossTerms<T> terms = fusion_loss(state.net, batch, codec, state.config.pixel_loss_weight, true);
  if (!std::isfinite(static_cast<double>(terms.total)))
    throw DivergenceError("non-finite loss at step " + std::to_string(state.step + 1));
  for (T g : ps.grads())
    if (!std::isfinite(static_cast<double>(g)))
      throw DivergenceError("non-finite gradient at step " + std::to_string(state.step + 1));
  state.optimizer.step(ps.values(), ps.grads());
  nn::ema_update<T>(ps.values(), state.ema_params, state.config.ema_decay);
  ++state.step;
  return terms;
}

inline LossTerms<float> train_step(TrainState<float>& state, const std::vector<TrainingPair>& batch,
                                   const Codec& codec) {
  return train_step_encoded(state, encode_batch(batch, codec), codec);
}

/// Draws random patch crops from a dataset, with optional slot permutation.
class PatchSampler {
 public:
  PatchSampler(const std::vector<TrainingPair>& data, int patch_size, int alignment, bool permute)
      : data_(data), patch_(patch_size), align_(alignment), permute_(permute) {
    if (data_.empty()) throw ValueError("training set is empty");
    for (const auto& p : data_)
      if (p.ground_truth.height() < patch_ || p.ground_truth.width() < patch_)
        throw ValueError("training images must be at least patch_size (" + std::to_string(patch_) + ")");
  }

  std::vector<TrainingPair> draw(int count, Rng& rng) const {
    std::vector<TrainingPair> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
      const TrainingPair& src = data_[rng.below(data_.size())];
      const int top = pick(src.ground_truth.height(), rng);
      const int left = pick(src.ground_truth.width(), rng);
      const FocusStack padded = pad_stack(src.stack);
      std::vector<std::size_t> order(kFusionSlots);
      for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
      if (permute_) rng.shuffle(order);
      std::vector<ImageBuffer> imgs;
      std::vector<double> dist;
      for (std::size_t s : order) {
        imgs.push_back(padded[s].crop(top, left, patch_, patch_));
        dist.push_back(padded.focus_distances()[s]);
      }
      out.push_back({FocusStack(std::move(imgs), std::move(dist)), src.ground_truth.crop(top, left, patch_, patch_)});
    }
    return out;
  }

 private:
  int pick(int extent, Rng& rng) const {
    const int positions = (extent - patch_) / align_ + 1;
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(positions))) * align_;
  }

  const std::vector<TrainingPair>& data_;
  int patch_, align_;
  bool permute_;
};

struct TrainLogRow {
  long long step = 0;
  double loss = 0.0;
  double wall_seconds = 0.0;
};

/// Runs `state.config.steps − state.step` optimizer steps over random patches.
/// `on_log` is called every `log_every` steps and on the final step.
inline std::vector<TrainLogRow> train(TrainState<float>& state, const std::vector<TrainingPair>& data,
                                      const Codec& codec,
                                      const std::function<void(const TrainLogRow&)>& on_log = {}) {
  const TrainConfig& cfg = state.config;
  cfg.validate(codec.descriptor().spatial_factor);
  if (state.net.config().latent_channels != codec.descriptor().latent_channels)
    throw ShapeError("network latent channels do not match codec '" + codec.descriptor().name + "'");
  PatchSampler sampler(data, cfg.patch_size, codec.descriptor().spatial_factor, cfg.permute_slots);
  std::vector<TrainLogRow> rows;
  const auto t0 = std::chrono::steady_clock::now();
  while (state.step < cfg.steps) {
    const auto batch = sampler.draw(cfg.global_batch, state.rng);
    const LossTerms<float> terms = train_step(state, batch, codec);
    TrainLogRow row{state.step, static_cast<double>(terms.total),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    rows.push_back(row);
    if (on_log && (state.step % cfg.log_every == 0 || state.step == cfg.steps)) on_log(row);
  }
  return rows;
}

}  // namespace latfuse
