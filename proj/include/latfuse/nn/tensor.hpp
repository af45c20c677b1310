#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"

namespace latfuse::nn {

/// 64-byte aligned allocation. Eigen's vectorized kernels peel differently
/// depending on buffer alignment, which changes the rounding of sums; a fixed
/// alignment keeps results bitwise reproducible from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW tensor.
template <class T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }

  T* sample(int b) noexcept { return data.data() + b * sample_size(); }
  const T* sample(int b) const noexcept { return data.data() + b * sample_size(); }
  T* channel(int b, int ch) noexcept { return sample(b) + ch * plane(); }
  const T* channel(int b, int ch) const noexcept { return sample(b) + ch * plane(); }

  T& at(int b, int ch, int y, int x) noexcept { return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x]; }
  T at(int b, int ch, int y, int x) const noexcept {
    return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_string() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.n = n, out.c = c, out.h = h, out.w = w;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <class T>
Tensor<T>& operator+=(Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("tensor add: " + a.shape_string() + " vs " + b.shape_string());
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  return a;
}

/// Channel concatenation of two tensors with matching n, h, w.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ShapeError("concat: " + a.shape_string() + " vs " + b.shape_string());
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int s = 0; s < a.n; ++s) {
    std::copy_n(a.sample(s), a.sample_size(), out.sample(s));
    std::copy_n(b.sample(s), b.sample_size(), out.sample(s) + a.sample_size());
  }
  return out;
}

/// Inverse of concat_channels for gradients: splits off the first `ca` channels.
template <class T>
void split_channels(const Tensor<T>& g, int ca, Tensor<T>& ga, Tensor<T>& gb) {
  ga = Tensor<T>(g.n, ca, g.h, g.w);
  gb = Tensor<T>(g.n, g.c - ca, g.h, g.w);
  for (int s = 0; s < g.n; ++s) {
    std::copy_n(g.sample(s), ga.sample_size(), ga.sample(s));
    std::copy_n(g.sample(s) + ga.sample_size(), gb.sample_size(), gb.sample(s));
  }
}

}  // namespace latfuse::nn
