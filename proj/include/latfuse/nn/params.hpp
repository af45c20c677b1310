#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/random.hpp"
#include "latfuse/nn/tensor.hpp"

namespace latfuse::nn {

/// All trainable weights of a network in one flat buffer, with a matching
/// gradient buffer. Layers refer to their tensors by handle.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  using Handle = std::size_t;

  Handle add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    entries_.push_back({std::move(name), std::move(shape), values_.size(), n});
    values_.resize(values_.size() + n, T(0));
    grads_.resize(values_.size(), T(0));
    return entries_.size() - 1;
  }

  std::span<T> value(Handle h) { return {values_.data() + entries_[h].offset, entries_[h].size}; }
  std::span<const T> value(Handle h) const { return {values_.data() + entries_[h].offset, entries_[h].size}; }
  std::span<T> grad(Handle h) { return {grads_.data() + entries_[h].offset, entries_[h].size}; }

  AlignedVector<T>& values() noexcept { return values_; }
  const AlignedVector<T>& values() const noexcept { return values_; }
  AlignedVector<T>& grads() noexcept { return grads_; }
  const AlignedVector<T>& grads() const noexcept { return grads_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t count() const noexcept { return values_.size(); }

  void zero_grad() { std::fill(grads_.begin(), grads_.end(), T(0)); }

  void set_values(std::span<const T> v) {
    if (v.size() != values_.size())
      throw ShapeError("parameter count mismatch: " + std::to_string(v.size()) + " vs " +
                       std::to_string(values_.size()));
    std::copy(v.begin(), v.end(), values_.begin());
  }

 private:
  std::vector<Entry> entries_;
  AlignedVector<T> values_;
  AlignedVector<T> grads_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill, scaled by `gain`.
template <class T>
void init_uniform(std::span<T> v, int fan_in, Rng& rng, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  for (T& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace latfuse::nn
