#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "latfuse/core/error.hpp"

namespace latfuse::nn {

/// Adaptive-moment optimizer with bias correction.
template <class T>
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::size_t count, Options opt) : opt_(opt), m_(count, 0.0), v_(count, 0.0) {}

  void step(std::span<T> params, std::span<const T> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ShapeError("Adam: parameter count changed");
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g * g;
      params[i] -= static_cast<T>(opt_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opt_.eps));
    }
  }

  const Options& options() const noexcept { return opt_; }
  long long steps() const noexcept { return t_; }
  std::vector<double>& first_moment() noexcept { return m_; }
  std::vector<double>& second_moment() noexcept { return v_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }
  void set_steps(long long t) noexcept { t_ = t; }

 private:
  Options opt_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

/// ema ← decay·ema + (1 − decay)·params, elementwise.
template <class T>
void ema_update(std::span<const T> params, std::span<T> ema, double decay) {
  if (params.size() != ema.size()) throw ShapeError("ema_update: shape mismatch");
  if (!(decay >= 0.0 && decay < 1.0)) throw ValueError("ema_update: decay must lie in [0, 1)");
  const T d = static_cast<T>(decay);
  const T one_minus = static_cast<T>(1.0 - decay);
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = d * ema[i] + one_minus * params[i];
}

}  // namespace latfuse::nn
