#pragma once

#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/fusion/unet.hpp"

namespace latfuse {

/// Slot index → source index for a stack of `n` images: cyclic repetition.
inline std::vector<std::size_t> padding_order(std::size_t n) {
  if (n == 0) throw ValueError("cannot pad an empty stack");
  if (n > static_cast<std::size_t>(kFusionSlots)) throw ValueError("stack larger than 7 slots");
  std::vector<std::size_t> order(kFusionSlots);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % n;
  return order;
}

/// Fills a stack to exactly 7 images by cyclic duplication: [A, B] → [A, B, A, B, A, B, A].
inline FocusStack pad_stack(const FocusStack& stack) {
  if (stack.size() == 0) throw ValueError("pad_stack: empty stack");
  if (stack.size() == static_cast<std::size_t>(kFusionSlots)) return stack;
  std::vector<ImageBuffer> images;
  std::vector<double> distances;
  for (std::size_t src : padding_order(stack.size())) {
    images.push_back(stack[src]);
    distances.push_back(stack.focus_distances()[src]);
  }
  return FocusStack(std::move(images), std::move(distances), stack.registered());
}

}  // namespace latfuse
