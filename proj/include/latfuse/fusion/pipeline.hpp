#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "latfuse/codec/codec.hpp"
#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/fusion/stack.hpp"
#include "latfuse/fusion/train.hpp"
#include "latfuse/fusion/unet.hpp"
#include "latfuse/tiling/patch_plan.hpp"
#include "latfuse/tiling/stitch.hpp"

namespace latfuse {

/// Runs the fusion network on seven same-shaped latents.
inline LatentGrid fuse_latents(std::span<const LatentGrid> latents, const FusionNet<float>& net) {
  if (latents.size() != static_cast<std::size_t>(kFusionSlots))
    throw ValueError("fuse_latents needs exactly 7 latents, got " + std::to_string(latents.size()));
  const LatentGrid& first = latents.front();
  for (const auto& l : latents)
    if (!l.same_shape(first)) throw ShapeError("latent slots differ: " + l.shape_string() + " vs " + first.shape_string());
  const int C = first.channels();
  nn::Tensor<float> x(1, kFusionSlots * C, first.height(), first.width());
  for (int s = 0; s < kFusionSlots; ++s)
    std::copy(latents[s].values().begin(), latents[s].values().end(), x.channel(0, s * C));
  return LatentGrid(net.forward(x));
}

/// Uses the EMA weights when `use_ema` is set, the live weights otherwise.
inline LatentGrid fuse_latents(std::span<const LatentGrid> latents, const TrainState<float>& state, bool use_ema) {
  if (!use_ema) return fuse_latents(latents, state.net);
  return fuse_latents(latents, state.ema_net());
}

struct TilingConfig {
  int patch_size = 64;
};

/// Patch plan `fuse` uses for an H×W input: the image is first padded up to
/// the codec factor and to at least one patch.
inline PatchPlan fusion_patch_plan(int H, int W, const CodecDescriptor& desc, const TilingConfig& tiling) {
  const int P = tiling.patch_size;
  auto round_up = [&](int v) { return (v + desc.spatial_factor - 1) / desc.spatial_factor * desc.spatial_factor; };
  return plan_patches(std::max(P, round_up(H)), std::max(P, round_up(W)), P);
}

/// Inference entry point: tile with overlapping patches, encode each input
/// patch, fill the 7 slots by cyclic padding, fuse, decode, and blend the
/// decoded patches.
///
/// Images smaller than the patch or not divisible by the codec factor are
/// reflection-padded first and the result is cropped back.
inline ImageBuffer fuse(const FocusStack& stack, const Codec& codec, const TilingConfig& tiling,
                        const FusionNet<float>& net, ImageBuffer* weight_map = nullptr) {
  const auto& desc = codec.descriptor();
  const int P = tiling.patch_size;
  if (P % desc.spatial_factor != 0 || (P / desc.spatial_factor) % 8 != 0 || P % 4 != 0)
    throw ValueError("patch size " + std::to_string(P) + " must be a multiple of 4 and of 8·codec factor");
  if (net.config().latent_channels != desc.latent_channels)
    throw ShapeError("network latent channels do not match codec '" + desc.name + "'");
  if (stack[0].channels() != 3) throw ShapeError("fuse expects RGB images");

  // Padding repeats images, and encoding is per-sample deterministic, so only
  // the distinct inputs are encoded; their latents fill the 7 slots.
  const std::vector<std::size_t> order = padding_order(stack.size());
  const int n = static_cast<int>(stack.size());
  const int H = stack.height(), W = stack.width();
  const PatchPlan plan = fusion_patch_plan(H, W, desc, tiling);
  const int Hp = plan.image_height, Wp = plan.image_width;
  std::vector<ImageBuffer> inputs;
  for (const auto& img : stack.images()) inputs.push_back(img.pad_reflect(Hp, Wp));

  BlendAccumulator acc(Hp, Wp, 3);
  nn::Tensor<float> batch(n, 3, P, P);
  for (const PatchRect& r : plan.rects) {
    for (int s = 0; s < n; ++s) {
      const nn::Tensor<float> t = to_planar(inputs[s].crop(r.top, r.left, P, P));
      std::copy(t.data.begin(), t.data.end(), batch.sample(s));
    }
    const nn::Tensor<float> z = codec.encode_batch(batch);
    nn::Tensor<float> slots(1, kFusionSlots * z.c, z.h, z.w);
    for (int s = 0; s < kFusionSlots; ++s)
      std::copy(z.sample(static_cast<int>(order[s])), z.sample(static_cast<int>(order[s])) + z.sample_size(),
                slots.channel(0, s * z.c));
    const nn::Tensor<float> fused = net.forward(slots);
    acc.add(r, to_interleaved(codec.decode_batch(fused)), patch_weight_mask(r, plan));
  }
  if (weight_map) *weight_map = acc.weight_map();
  ImageBuffer out = acc.resolve();
  out.clamp_unit();
  if (Hp == H && Wp == W) return out;
  return out.crop(0, 0, H, W);
}

}  // namespace latfuse
