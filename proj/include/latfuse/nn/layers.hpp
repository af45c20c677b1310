#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "latfuse/nn/params.hpp"
#include "latfuse/nn/tensor.hpp"

namespace latfuse::nn {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Layers are stateless apart from parameter handles. `forward` takes an
// optional cache that the matching `backward` consumes; pass nullptr for
// inference. Backward accumulates into the store's gradient buffer.

/// 2-D convolution, square kernel (1 or 3), stride 1 or 2, zero padding k/2.
template <class T>
class Conv2d {
 public:
  struct Cache {
    Tensor<T> input;
  };

  Conv2d() = default;
  Conv2d(ParamStore<T>& ps, const std::string& name, int cin, int cout, int kernel = 3, int stride = 1,
         bool bias = true)
      : cin_(cin), cout_(cout), k_(kernel), stride_(stride), has_bias_(bias) {
    detail::require(kernel == 1 || kernel == 3, "Conv2d: kernel must be 1 or 3");
    detail::require(stride == 1 || stride == 2, "Conv2d: stride must be 1 or 2");
    weight_ = ps.add(name + ".weight", {cout, cin, kernel, kernel});
    if (bias) bias_ = ps.add(name + ".bias", {cout});
  }

  void init(ParamStore<T>& ps, Rng& rng, double gain = 1.0) const {
    const int fan_in = cin_ * k_ * k_;
    init_uniform(ps.value(weight_), fan_in, rng, gain);
    if (has_bias_) init_uniform(ps.value(bias_), fan_in, rng, gain);
  }

  void zero(ParamStore<T>& ps) const {
    std::ranges::fill(ps.value(weight_), T(0));
    if (has_bias_) std::ranges::fill(ps.value(bias_), T(0));
  }

  int in_channels() const noexcept { return cin_; }
  int out_channels() const noexcept { return cout_; }
  typename ParamStore<T>::Handle weight_handle() const noexcept { return weight_; }
  typename ParamStore<T>::Handle bias_handle() const noexcept { return bias_; }

  int out_extent(int n) const { return (n + 2 * pad() - k_) / stride_ + 1; }

  Tensor<T> forward(const ParamStore<T>& ps, const Tensor<T>& x, Cache* cache = nullptr) const {
    if (x.c != cin_)
      throw ShapeError("Conv2d expects " + std::to_string(cin_) + " channels, got " + x.shape_string());
    const int ho = out_extent(x.h), wo = out_extent(x.w);
    Tensor<T> y(x.n, cout_, ho, wo);
    const int kk = cin_ * k_ * k_;
    const int positions = ho * wo;
    AlignedVector<T> col;
    ConstMatMap<T> W(ps.value(weight_).data(), cout_, kk);
    for (int b = 0; b < x.n; ++b) {
      const T* colp = im2col(x, b, col);
      MatMap<T> out(y.sample(b), cout_, positions);
      out.noalias() = W * ConstMatMap<T>(colp, kk, positions);
      if (has_bias_) {
        const auto bias = ps.value(bias_);
        for (int o = 0; o < cout_; ++o) out.row(o).array() += bias[o];
      }
    }
    if (cache) cache->input = x;
    return y;
  }

  /// Returns dL/dx (empty when `need_dx` is false).
  Tensor<T> backward(ParamStore<T>& ps, const Cache& cache, const Tensor<T>& dy, bool need_dx = true) const {
    const Tensor<T>& x = cache.input;
    const int kk = cin_ * k_ * k_;
    const int positions = dy.h * dy.w;
    AlignedVector<T> col, dcol;
    ConstMatMap<T> W(ps.value(weight_).data(), cout_, kk);
    MatMap<T> dW(ps.grad(weight_).data(), cout_, kk);
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(x.n, x.c, x.h, x.w);
    for (int b = 0; b < x.n; ++b) {
      ConstMatMap<T> g(dy.sample(b), cout_, positions);
      const T* colp = im2col(x, b, col);
      dW.noalias() += g * ConstMatMap<T>(colp, kk, positions).transpose();
      if (has_bias_) {
        auto db = ps.grad(bias_);
        for (int o = 0; o < cout_; ++o) db[o] += g.row(o).sum();
      }
      if (!need_dx) continue;
      if (is_pointwise()) {
        MatMap<T>(dx.sample(b), kk, positions).noalias() = W.transpose() * g;
      } else {
        dcol.resize(static_cast<std::size_t>(kk) * positions);
        MatMap<T>(dcol.data(), kk, positions).noalias() = W.transpose() * g;
        col2im(dcol, dx, b);
      }
    }
    return dx;
  }

  /// dL/dx only; weights are treated as constants (frozen networks).
  Tensor<T> input_grad(const ParamStore<T>& ps, const Cache& cache, const Tensor<T>& dy) const {
    const Tensor<T>& x = cache.input;
    const int kk = cin_ * k_ * k_;
    const int positions = dy.h * dy.w;
    ConstMatMap<T> W(ps.value(weight_).data(), cout_, kk);
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    AlignedVector<T> dcol;
    for (int b = 0; b < x.n; ++b) {
      ConstMatMap<T> g(dy.sample(b), cout_, positions);
      if (is_pointwise()) {
        MatMap<T>(dx.sample(b), kk, positions).noalias() = W.transpose() * g;
      } else {
        dcol.resize(static_cast<std::size_t>(kk) * positions);
        MatMap<T>(dcol.data(), kk, positions).noalias() = W.transpose() * g;
        col2im(dcol, dx, b);
      }
    }
    return dx;
  }

 private:
  int pad() const noexcept { return k_ / 2; }
  bool is_pointwise() const noexcept { return k_ == 1 && stride_ == 1; }

  // Returns a pointer to the [cin·k·k, ho·wo] patch matrix of sample b.
  const T* im2col(const Tensor<T>& x, int b, AlignedVector<T>& col) const {
    if (is_pointwise()) return x.sample(b);
    const int ho = out_extent(x.h), wo = out_extent(x.w), p = pad();
    col.assign(static_cast<std::size_t>(cin_) * k_ * k_ * ho * wo, T(0));
    T* dst = col.data();
    for (int ci = 0; ci < cin_; ++ci) {
      const T* src = x.channel(b, ci);
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, dst += static_cast<std::size_t>(ho) * wo)
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - p;
            if (iy < 0 || iy >= x.h) continue;
            T* row = dst + oy * wo;
            const T* srow = src + iy * x.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - p;
              if (ix >= 0 && ix < x.w) row[ox] = srow[ix];
            }
          }
    }
    return col.data();
  }

  void col2im(const AlignedVector<T>& dcol, Tensor<T>& dx, int b) const {
    const int ho = out_extent(dx.h), wo = out_extent(dx.w), p = pad();
    const T* src = dcol.data();
    for (int ci = 0; ci < cin_; ++ci) {
      T* dst = dx.channel(b, ci);
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, src += static_cast<std::size_t>(ho) * wo)
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - p;
            if (iy < 0 || iy >= dx.h) continue;
            const T* row = src + oy * wo;
            T* drow = dst + iy * dx.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - p;
              if (ix >= 0 && ix < dx.w) drow[ix] += row[ox];
            }
          }
    }
  }

  int cin_ = 0, cout_ = 0, k_ = 3, stride_ = 1;
  bool has_bias_ = true;
  typename ParamStore<T>::Handle weight_ = 0, bias_ = 0;
};

/// Group normalization with per-channel affine, eps 1e-5.
template <class T>
class GroupNorm {
 public:
  struct Cache {
    Tensor<T> normalized;     // x̂
    std::vector<T> inv_std;   // per (sample, group)
  };

  GroupNorm() = default;
  GroupNorm(ParamStore<T>& ps, const std::string& name, int channels, int groups)
      : channels_(channels), groups_(groups) {
    detail::require(groups >= 1 && channels % groups == 0, "GroupNorm: groups must divide channels");
    gamma_ = ps.add(name + ".gamma", {channels});
    beta_ = ps.add(name + ".beta", {channels});
  }

  void init(ParamStore<T>& ps) const {
    std::ranges::fill(ps.value(gamma_), T(1));
    std::ranges::fill(ps.value(beta_), T(0));
  }

  Tensor<T> forward(const ParamStore<T>& ps, const Tensor<T>& x, Cache* cache = nullptr) const {
    if (x.c != channels_) throw ShapeError("GroupNorm channel mismatch: " + x.shape_string());
    const int cpg = channels_ / groups_;
    const std::size_t count = static_cast<std::size_t>(cpg) * x.plane();
    const auto gamma = ps.value(gamma_);
    const auto beta = ps.value(beta_);
    Tensor<T> y(x.n, x.c, x.h, x.w);
    if (cache) {
      cache->normalized = Tensor<T>(x.n, x.c, x.h, x.w);
      cache->inv_std.assign(static_cast<std::size_t>(x.n) * groups_, T(0));
    }
    for (int b = 0; b < x.n; ++b)
      for (int g = 0; g < groups_; ++g) {
        const T* src = x.channel(b, g * cpg);
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < count; ++i) sum += src[i];
        const double mean = sum / count;
        for (std::size_t i = 0; i < count; ++i) {
          const double d = src[i] - mean;
          sq += d * d;
        }
        const double inv = 1.0 / std::sqrt(sq / count + 1e-5);
        if (cache) cache->inv_std[b * groups_ + g] = static_cast<T>(inv);
        for (int cc = 0; cc < cpg; ++cc) {
          const int ch = g * cpg + cc;
          const T* s = x.channel(b, ch);
          T* d = y.channel(b, ch);
          T* nrm = cache ? cache->normalized.channel(b, ch) : nullptr;
          for (std::size_t i = 0; i < x.plane(); ++i) {
            const T xh = static_cast<T>((s[i] - mean) * inv);
            if (nrm) nrm[i] = xh;
            d[i] = xh * gamma[ch] + beta[ch];
          }
        }
      }
    return y;
  }

  Tensor<T> backward(ParamStore<T>& ps, const Cache& cache, const Tensor<T>& dy) const {
    const Tensor<T>& xh = cache.normalized;
    const int cpg = channels_ / groups_;
    const double count = static_cast<double>(cpg) * dy.plane();
    const auto gamma = ps.value(gamma_);
    auto dgamma = ps.grad(gamma_);
    auto dbeta = ps.grad(beta_);
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int b = 0; b < dy.n; ++b)
      for (int g = 0; g < groups_; ++g) {
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (int cc = 0; cc < cpg; ++cc) {
          const int ch = g * cpg + cc;
          const T* gy = dy.channel(b, ch);
          const T* nh = xh.channel(b, ch);
          double dg = 0.0, db = 0.0;
          for (std::size_t i = 0; i < dy.plane(); ++i) {
            dg += static_cast<double>(gy[i]) * nh[i];
            db += gy[i];
          }
          dgamma[ch] += static_cast<T>(dg);
          dbeta[ch] += static_cast<T>(db);
          sum_dxh += db * gamma[ch];
          sum_dxh_xh += dg * gamma[ch];
        }
        const double inv = cache.inv_std[b * groups_ + g];
        for (int cc = 0; cc < cpg; ++cc) {
          const int ch = g * cpg + cc;
          const T* gy = dy.channel(b, ch);
          const T* nh = xh.channel(b, ch);
          T* d = dx.channel(b, ch);
          for (std::size_t i = 0; i < dy.plane(); ++i) {
            const double dxh = static_cast<double>(gy[i]) * gamma[ch];
            d[i] = static_cast<T>(inv / count * (count * dxh - sum_dxh - nh[i] * sum_dxh_xh));
          }
        }
      }
    return dx;
  }

 private:
  int channels_ = 0, groups_ = 1;
  typename ParamStore<T>::Handle gamma_ = 0, beta_ = 0;
};

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = v / (T(1) + std::exp(-v));
  return y;
}

template <class T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T s = T(1) / (T(1) + std::exp(-x.data[i]));
    dx.data[i] *= s * (T(1) + x.data[i] * (T(1) - s));
  }
  return dx;
}

template <class T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch) {
      const T* s = x.channel(b, ch);
      T* d = y.channel(b, ch);
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx) d[yy * y.w + xx] = s[(yy / 2) * x.w + xx / 2];
    }
  return y;
}

template <class T>
Tensor<T> upsample_nearest2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (int b = 0; b < dy.n; ++b)
    for (int ch = 0; ch < dy.c; ++ch) {
      const T* s = dy.channel(b, ch);
      T* d = dx.channel(b, ch);
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) d[(yy / 2) * dx.w + xx / 2] += s[yy * dy.w + xx];
    }
  return dx;
}

/// Pre-activation residual block: GN → SiLU → conv3 → GN → SiLU → conv3, plus
/// identity (or 1×1 projection when widths differ) skip.
template <class T>
class ResBlock {
 public:
  struct Cache {
    typename GroupNorm<T>::Cache n1, n2;
    Tensor<T> pre1, pre2;  // GN outputs, SiLU inputs
    typename Conv2d<T>::Cache c1, c2, skip;
  };

  ResBlock() = default;
  ResBlock(ParamStore<T>& ps, const std::string& name, int cin, int cout, int groups_hint)
      : norm1_(ps, name + ".norm1", cin, fit_groups(cin, groups_hint)),
        conv1_(ps, name + ".conv1", cin, cout, 3),
        norm2_(ps, name + ".norm2", cout, fit_groups(cout, groups_hint)),
        conv2_(ps, name + ".conv2", cout, cout, 3),
        has_skip_(cin != cout) {
    if (has_skip_) skip_ = Conv2d<T>(ps, name + ".skip", cin, cout, 1);
  }

  void init(ParamStore<T>& ps, Rng& rng) const {
    norm1_.init(ps);
    norm2_.init(ps);
    conv1_.init(ps, rng);
    conv2_.init(ps, rng, 0.5);
    if (has_skip_) skip_.init(ps, rng);
  }

  Tensor<T> forward(const ParamStore<T>& ps, const Tensor<T>& x, Cache* c = nullptr) const {
    Tensor<T> pre1 = norm1_.forward(ps, x, c ? &c->n1 : nullptr);
    Tensor<T> h = conv1_.forward(ps, silu(pre1), c ? &c->c1 : nullptr);
    Tensor<T> pre2 = norm2_.forward(ps, h, c ? &c->n2 : nullptr);
    Tensor<T> out = conv2_.forward(ps, silu(pre2), c ? &c->c2 : nullptr);
    if (has_skip_)
      out += skip_.forward(ps, x, c ? &c->skip : nullptr);
    else
      out += x;
    if (c) {
      c->pre1 = std::move(pre1);
      c->pre2 = std::move(pre2);
    }
    return out;
  }

  Tensor<T> backward(ParamStore<T>& ps, const Cache& c, const Tensor<T>& dy) const {
    Tensor<T> g = conv2_.backward(ps, c.c2, dy);
    g = norm2_.backward(ps, c.n2, silu_backward(c.pre2, g));
    g = conv1_.backward(ps, c.c1, g);
    Tensor<T> dx = norm1_.backward(ps, c.n1, silu_backward(c.pre1, g));
    if (has_skip_)
      dx += skip_.backward(ps, c.skip, dy);
    else
      dx += dy;
    return dx;
  }

  static int fit_groups(int channels, int hint) {
    int g = std::min(hint, channels);
    while (g > 1 && channels % g != 0) --g;
    return g;
  }

 private:
  GroupNorm<T> norm1_;
  Conv2d<T> conv1_;
  GroupNorm<T> norm2_;
  Conv2d<T> conv2_;
  Conv2d<T> skip_;
  bool has_skip_ = false;
};

/// Single-head self-attention over flattened spatial positions, with
/// residual connection: x + proj(softmax(QᵀK/√C) applied to V).
template <class T>
class SelfAttention {
 public:
  struct Cache {
    typename GroupNorm<T>::Cache norm;
    typename Conv2d<T>::Cache q, k, v, proj;
    Tensor<T> qt, kt, vt;
    AlignedVector<T> attn;  // per sample [L, L], row = query
  };

  SelfAttention() = default;
  SelfAttention(ParamStore<T>& ps, const std::string& name, int channels, int groups_hint)
      : channels_(channels),
        norm_(ps, name + ".norm", channels, ResBlock<T>::fit_groups(channels, groups_hint)),
        q_(ps, name + ".q", channels, channels, 1),
        k_(ps, name + ".k", channels, channels, 1),
        v_(ps, name + ".v", channels, channels, 1),
        proj_(ps, name + ".proj", channels, channels, 1) {}

  void init(ParamStore<T>& ps, Rng& rng) const {
    norm_.init(ps);
    q_.init(ps, rng);
    k_.init(ps, rng);
    v_.init(ps, rng);
    proj_.init(ps, rng, 0.5);
  }

  Tensor<T> forward(const ParamStore<T>& ps, const Tensor<T>& x, Cache* c = nullptr) const {
    const Tensor<T> hn = norm_.forward(ps, x, c ? &c->norm : nullptr);
    Tensor<T> q = q_.forward(ps, hn, c ? &c->q : nullptr);
    Tensor<T> k = k_.forward(ps, hn, c ? &c->k : nullptr);
    Tensor<T> v = v_.forward(ps, hn, c ? &c->v : nullptr);
    const int L = x.h * x.w;
    const T scale = T(1) / std::sqrt(static_cast<T>(channels_));
    Tensor<T> o(x.n, x.c, x.h, x.w);
    RowMat<T> A(L, L);
    if (c) c->attn.assign(static_cast<std::size_t>(x.n) * L * L, T(0));
    for (int b = 0; b < x.n; ++b) {
      ConstMatMap<T> Q(q.sample(b), channels_, L), K(k.sample(b), channels_, L), V(v.sample(b), channels_, L);
      A.noalias() = (Q.transpose() * K) * scale;
      for (int i = 0; i < L; ++i) {
        auto row = A.row(i);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      MatMap<T>(o.sample(b), channels_, L).noalias() = V * A.transpose();
      if (c) std::copy_n(A.data(), static_cast<std::size_t>(L) * L, c->attn.data() + static_cast<std::size_t>(b) * L * L);
    }
    Tensor<T> out = proj_.forward(ps, o, c ? &c->proj : nullptr);
    out += x;
    if (c) {
      c->qt = std::move(q);
      c->kt = std::move(k);
      c->vt = std::move(v);
    }
    return out;
  }

  Tensor<T> backward(ParamStore<T>& ps, const Cache& c, const Tensor<T>& dy) const {
    const Tensor<T> dO = proj_.backward(ps, c.proj, dy);
    const int L = dy.h * dy.w;
    const T scale = T(1) / std::sqrt(static_cast<T>(channels_));
    Tensor<T> dq(dy.n, dy.c, dy.h, dy.w), dk = dq, dv = dq;
    RowMat<T> dA(L, L), dS(L, L);
    for (int b = 0; b < dy.n; ++b) {
      ConstMatMap<T> A(c.attn.data() + static_cast<std::size_t>(b) * L * L, L, L);
      ConstMatMap<T> Q(c.qt.sample(b), channels_, L), K(c.kt.sample(b), channels_, L), V(c.vt.sample(b), channels_, L);
      ConstMatMap<T> G(dO.sample(b), channels_, L);
      MatMap<T>(dv.sample(b), channels_, L).noalias() = G * A;
      dA.noalias() = G.transpose() * V;
      for (int i = 0; i < L; ++i) {
        const T dot = dA.row(i).dot(A.row(i));
        dS.row(i) = A.row(i).array() * (dA.row(i).array() - dot);
      }
      dS *= scale;
      MatMap<T>(dq.sample(b), channels_, L).noalias() = K * dS.transpose();
      MatMap<T>(dk.sample(b), channels_, L).noalias() = Q * dS;
    }
    Tensor<T> dhn = q_.backward(ps, c.q, dq);
    dhn += k_.backward(ps, c.k, dk);
    dhn += v_.backward(ps, c.v, dv);
    Tensor<T> dx = norm_.backward(ps, c.norm, dhn);
    dx += dy;
    return dx;
  }

 private:
  int channels_ = 0;
  GroupNorm<T> norm_;
  Conv2d<T> q_, k_, v_, proj_;
};

}  // namespace latfuse::nn
