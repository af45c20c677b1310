#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"

namespace latfuse::eval {

inline constexpr double kPsnrCap = 100.0;

struct MetricResult {
  std::string name;
  double value = 0.0;
  bool higher_is_better = true;
};

namespace detail {

inline void require_same(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
}

}  // namespace detail

inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
  detail::require_same(a, b, "mse");
  const auto av = a.values();
  const auto bv = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    sum += d * d;
  }
  return sum / static_cast<double>(av.size());
}

/// 10·log10(1/mse) for the [0,1] domain; kPsnrCap when mse is 0.
inline double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) { return psnr_from_mse(mse(a, b)); }

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

using Plane = std::vector<double>;

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) sum += g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  for (double& v : g) v /= sum;
  return g;
}

// Separable 'valid' filtering: output is (H − k + 1) × (W − k + 1).
inline Plane filter_valid(const Plane& x, int H, int W, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int Ho = H - k + 1, Wo = W - k + 1;
  Plane tmp(static_cast<std::size_t>(H) * Wo);
  for (int y = 0; y < H; ++y)
    for (int xo = 0; xo < Wo; ++xo) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * x[static_cast<std::size_t>(y) * W + xo + i];
      tmp[static_cast<std::size_t>(y) * Wo + xo] = s;
    }
  Plane out(static_cast<std::size_t>(Ho) * Wo);
  for (int yo = 0; yo < Ho; ++yo)
    for (int xo = 0; xo < Wo; ++xo) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * tmp[static_cast<std::size_t>(yo + i) * Wo + xo];
      out[static_cast<std::size_t>(yo) * Wo + xo] = s;
    }
  return out;
}

struct SsimTerms {
  double ssim = 0.0;  // mean of luminance·contrast-structure
  double cs = 0.0;    // mean of contrast-structure only
};

inline SsimTerms ssim_plane(const Plane& a, const Plane& b, int H, int W, const SsimOptions& o) {
  const auto g = gaussian_window(o.window, o.sigma);
  Plane aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Plane mu_a = filter_valid(a, H, W, g), mu_b = filter_valid(b, H, W, g);
  const Plane s_aa = filter_valid(aa, H, W, g), s_bb = filter_valid(bb, H, W, g), s_ab = filter_valid(ab, H, W, g);
  const double c1 = o.k1 * o.k1, c2 = o.k2 * o.k2;
  double sum_ssim = 0.0, sum_cs = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double lum = (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
    sum_ssim += lum * cs;
    sum_cs += cs;
  }
  const double n = static_cast<double>(mu_a.size());
  return {sum_ssim / n, sum_cs / n};
}

inline Plane channel_plane(const ImageBuffer& img, int c) {
  Plane p(img.pixel_count());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) p[static_cast<std::size_t>(y) * img.width() + x] = img.at(y, x, c);
  return p;
}

// 2×2 average pooling; an odd trailing row/column is dropped.
inline Plane downsample2(const Plane& x, int H, int W) {
  const int Ho = H / 2, Wo = W / 2;
  Plane out(static_cast<std::size_t>(Ho) * Wo);
  for (int y = 0; y < Ho; ++y)
    for (int xx = 0; xx < Wo; ++xx) {
      const std::size_t i = static_cast<std::size_t>(2 * y) * W + 2 * xx;
      out[static_cast<std::size_t>(y) * Wo + xx] = 0.25 * (x[i] + x[i + 1] + x[i + W] + x[i + W + 1]);
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over 'valid' Gaussian windows, averaged over channels.
///
/// Images smaller than the window use the largest odd window that fits
/// (same sigma, renormalized), so tiny fixtures still get a value.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b, SsimOptions opt = {}) {
  detail::require_same(a, b, "ssim");
  const int fit = std::min({opt.window, a.height(), a.width()});
  opt.window = fit % 2 == 1 ? fit : fit - 1;
  if (opt.window < 1) throw ShapeError("ssim: empty image");
  double sum = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    sum += detail::ssim_plane(detail::channel_plane(a, c), detail::channel_plane(b, c), a.height(), a.width(), opt)
               .ssim;
  return sum / a.channels();
}

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Smallest image side that supports `scales` dyadic scales with an 11-px window.
inline int ms_ssim_min_size(int scales, int window = 11) { return (window - 1) * (1 << (scales - 1)) + 1; }

struct MsSsimResult {
  double value = 0.0;
  int scales = 0;
};

/// Multi-scale SSIM with the standard five-scale weights.
///
/// With `allow_fewer_scales`, images too small for five scales use as many as
/// fit, with the leading weights renormalized; the count is returned. Negative
/// contrast-structure terms are clamped to 0 before exponentiation.
inline MsSsimResult ms_ssim(const ImageBuffer& a, const ImageBuffer& b, bool allow_fewer_scales = true,
                            const SsimOptions& opt = {}) {
  detail::require_same(a, b, "ms_ssim");
  const int min_dim = std::min(a.height(), a.width());
  int scales = static_cast<int>(kMsSsimWeights.size());
  if (min_dim < ms_ssim_min_size(scales, opt.window)) {
    if (!allow_fewer_scales)
      throw ShapeError("ms_ssim: images must be at least " + std::to_string(ms_ssim_min_size(scales, opt.window)) +
                       " px on each side for 5 scales, got " + a.shape_string());
    while (scales > 1 && min_dim < ms_ssim_min_size(scales, opt.window)) --scales;
    if (min_dim < ms_ssim_min_size(1, opt.window))
      throw ShapeError("ms_ssim: images must be at least " + std::to_string(ms_ssim_min_size(1, opt.window)) +
                       " px on each side, got " + a.shape_string());
  }
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kMsSsimWeights[s];

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    detail::Plane pa = detail::channel_plane(a, c), pb = detail::channel_plane(b, c);
    int H = a.height(), W = a.width();
    double prod = 1.0;
    for (int s = 0; s < scales; ++s) {
      const auto t = detail::ssim_plane(pa, pb, H, W, opt);
      const double w = kMsSsimWeights[s] / wsum;
      const double term = s + 1 == scales ? t.ssim : t.cs;
      prod *= std::pow(std::max(term, 0.0), w);
      if (s + 1 < scales) {
        pa = detail::downsample2(pa, H, W);
        pb = detail::downsample2(pb, H, W);
        H /= 2;
        W /= 2;
      }
    }
    total += prod;
  }
  return {total / a.channels(), scales};
}

/// Full-reference metric callback, e.g. an external learned metric.
struct ExternalMetric {
  std::string name;
  bool higher_is_better = false;
  std::function<double(const ImageBuffer& fused, const ImageBuffer& reference)> score;
};

/// MSE, PSNR, SSIM and MS-SSIM for one image pair, plus any plugins.
inline std::vector<MetricResult> full_reference_metrics(const ImageBuffer& fused, const ImageBuffer& gt,
                                                        const std::vector<ExternalMetric>& plugins = {}) {
  const double m = mse(fused, gt);
  std::vector<MetricResult> out = {{"mse", m, false},
                                   {"psnr", psnr_from_mse(m), true},
                                   {"ssim", ssim(fused, gt), true},
                                   {"ms_ssim", ms_ssim(fused, gt).value, true}};
  for (const auto& p : plugins) out.push_back({p.name, p.score(fused, gt), p.higher_is_better});
  return out;
}

}  // namespace latfuse::eval
