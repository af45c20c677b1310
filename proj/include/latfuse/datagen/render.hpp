#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/datagen/assets.hpp"
#include "latfuse/datagen/scene.hpp"

namespace latfuse::datagen {

/// Thin-lens defocus blur radius in pixels.
///
/// Blur-disc diameter on the sensor: c = (f²/N)·|s − s_f| / (s·(s_f − f)),
/// with distances in metres. The radius is c/2 converted with `pixels_per_mm`.
inline double coc_radius(double subject_m, double focus_m, double focal_length_mm, double f_stop,
                         double pixels_per_mm) {
  const double f = focal_length_mm / 1000.0;
  if (!(f_stop > 0.0)) throw ValueError("f-stop must be positive");
  if (!(subject_m > f) || !(focus_m > f))
    throw ValueError("subject and focus distances must exceed the focal length");
  const double diameter_m = (f * f / f_stop) * std::fabs(subject_m - focus_m) / (subject_m * (focus_m - f));
  return 0.5 * diameter_m * 1000.0 * pixels_per_mm;
}

inline double pixels_per_mm(const SceneSpec& s) { return s.resolution / s.sensor_width_mm; }

/// Normalized uniform disc kernel: taps with dx² + dy² ≤ r², each 1/count.
/// Returned row-major with side 2·floor(r) + 1.
inline std::vector<double> disc_kernel(double radius) {
  if (!(radius >= 0.0)) throw ValueError("disc radius must be >= 0");
  const int R = static_cast<int>(std::floor(radius));
  const int side = 2 * R + 1;
  std::vector<double> k(static_cast<std::size_t>(side) * side, 0.0);
  int count = 0;
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx)
      if (dx * dx + dy * dy <= radius * radius) {
        k[static_cast<std::size_t>(dy + R) * side + dx + R] = 1.0;
        ++count;
      }
  for (double& v : k) v /= count;
  return k;
}

/// Disc blur with edge-replicated borders, equivalent to convolving with
/// disc_kernel(radius). Radius below 1 is the identity.
///
/// Each kernel row is a contiguous span, so the sum is taken from row prefix
/// sums: O(H·W·r) per channel instead of O(H·W·r²).
inline ImageBuffer disc_blur(const ImageBuffer& img, double radius) {
  if (!(radius >= 0.0)) throw ValueError("disc radius must be >= 0");
  const int R = static_cast<int>(std::floor(radius));
  if (R == 0) return img;
  const int H = img.height(), W = img.width(), C = img.channels();
  std::vector<int> half(2 * R + 1);
  int count = 0;
  for (int dy = -R; dy <= R; ++dy) {
    int hw = 0;
    while ((hw + 1) * (hw + 1) + dy * dy <= radius * radius) ++hw;
    half[dy + R] = hw;
    count += 2 * hw + 1;
  }
  const int Wp = W + 2 * R;
  ImageBuffer out(H, W, C);
  std::vector<double> prefix(static_cast<std::size_t>(H) * (Wp + 1));
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      double* row = prefix.data() + static_cast<std::size_t>(y) * (Wp + 1);
      row[0] = 0.0;
      for (int x = 0; x < Wp; ++x) row[x + 1] = row[x] + img.at(y, std::clamp(x - R, 0, W - 1), c);
    }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int dy = -R; dy <= R; ++dy) {
          const int sy = std::clamp(y + dy, 0, H - 1);
          const double* row = prefix.data() + static_cast<std::size_t>(sy) * (Wp + 1);
          const int hw = half[dy + R];
          // padded column of x is x + R
          acc += row[x + R + hw + 1] - row[x + R - hw];
        }
        out.at(y, x, c) = static_cast<float>(acc / count);
      }
  }
  return out;
}

/// Premultiplied-alpha "over" of `layer` (RGBA) onto `dst` (RGB), in place.
inline void composite_over(ImageBuffer& dst, const ImageBuffer& layer) {
  if (layer.channels() != 4 || dst.channels() != 3 || !dst.same_extent(layer))
    throw ShapeError("composite_over: need RGB destination and same-size RGBA layer");
  for (int y = 0; y < dst.height(); ++y)
    for (int x = 0; x < dst.width(); ++x) {
      const float a = layer.at(y, x, 3);
      for (int c = 0; c < 3; ++c) dst.at(y, x, c) = layer.at(y, x, c) + (1.0f - a) * dst.at(y, x, c);
    }
}

namespace detail {

inline float bilinear(const ImageBuffer& tex, double u, double v, int c) {
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  const double fx = u - x0, fy = v - y0;
  auto get = [&](int y, int x) -> double {
    x = std::clamp(x, 0, tex.width() - 1);
    y = std::clamp(y, 0, tex.height() - 1);
    return tex.at(y, x, c);
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * get(y0, x0) + fx * get(y0, x0 + 1)) +
                            fy * ((1 - fx) * get(y0 + 1, x0) + fx * get(y0 + 1, x0 + 1)));
}

}  // namespace detail

/// Rasterizes one plane as a premultiplied RGBA layer at scene resolution.
inline ImageBuffer render_layer(const PlaneSpec& plane, const SceneSpec& scene, const AssetCatalog& assets) {
  const int N = scene.resolution;
  ImageBuffer layer(N, N, 4);
  if (plane.background) {
    const ImageBuffer& tex = assets.background(plane.texture_id).rgb;
    // Cover-fit: scale so the texture fills the frame, centred.
    const double s = std::min(tex.width(), tex.height()) / static_cast<double>(N);
    const double ox = (tex.width() - s * N) / 2.0, oy = (tex.height() - s * N) / 2.0;
    for (int y = 0; y < N; ++y)
      for (int x = 0; x < N; ++x) {
        const double u = ox + (x + 0.5) * s - 0.5, v = oy + (y + 0.5) * s - 0.5;
        for (int c = 0; c < 3; ++c) layer.at(y, x, c) = detail::bilinear(tex, u, v, c);
        layer.at(y, x, 3) = 1.0f;
      }
    return layer;
  }

  const ImageBuffer& tex = assets.subject(plane.texture_id).rgba;
  if (!(plane.scale > 0.0)) throw ValueError("plane '" + plane.texture_id + "' has zero area");
  const double height_px = plane.scale * N;
  const double px_to_tex = tex.height() / height_px;
  const double cx = plane.position[0] * N, cy = plane.position[1] * N;
  const double th = plane.rotation_deg * 3.141592653589793 / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  double coverage = 0.0;
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      // inverse rotation into the subject frame
      const double lx = cs * dx + sn * dy, ly = -sn * dx + cs * dy;
      const double u = lx * px_to_tex + tex.width() / 2.0 - 0.5;
      const double v = ly * px_to_tex + tex.height() / 2.0 - 0.5;
      if (u < -0.5 || v < -0.5 || u > tex.width() - 0.5 || v > tex.height() - 0.5) continue;
      const float a = detail::bilinear(tex, u, v, 3);
      for (int c = 0; c < 3; ++c) layer.at(y, x, c) = detail::bilinear(tex, u, v, c) * a;
      layer.at(y, x, 3) = a;
      coverage += a;
    }
  if (!(coverage > 0.0)) throw ValueError("plane '" + plane.texture_id + "' covers no pixels");
  return layer;
}

/// Plane indices ordered far to near (background first); ties keep plane order.
inline std::vector<std::size_t> back_to_front(const SceneSpec& scene) {
  std::vector<std::size_t> order(scene.planes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scene.planes[a].distance > scene.planes[b].distance; });
  return order;
}

inline void apply_lighting(ImageBuffer& img, const LightingAsset& light) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(std::clamp(img.at(y, x, c) * light.gain * light.tint[c], 0.0, 1.0));
}

/// Composites pre-rendered layers with per-plane blur radii (pixels).
inline ImageBuffer composite_layers(const SceneSpec& scene, const std::vector<ImageBuffer>& layers,
                                    const std::vector<double>& radii, const LightingAsset& light) {
  ImageBuffer out(scene.resolution, scene.resolution, 3, 0.0f);
  for (std::size_t i : back_to_front(scene)) {
    if (radii[i] < 1.0)
      composite_over(out, layers[i]);
    else
      composite_over(out, disc_blur(layers[i], radii[i]));
  }
  apply_lighting(out, light);
  return out;
}

/// Per-plane blur radii for a focus distance.
inline std::vector<double> plane_radii(const SceneSpec& scene, double focus_m) {
  std::vector<double> r;
  for (const auto& p : scene.planes)
    r.push_back(coc_radius(p.distance, focus_m, scene.focal_length_mm, scene.f_stop, pixels_per_mm(scene)));
  return r;
}

struct RenderedSample {
  FocusStack stack;          // image i focused on plane i
  ImageBuffer ground_truth;  // all radii zero
  SceneSpec scene;
};

/// Renders the focus stack (one image per plane) and the sharp ground truth.
/// There is no shadow term: planes only occlude.
inline RenderedSample render_stack(const SceneSpec& scene, const AssetCatalog& assets) {
  if (scene.planes.empty()) throw ValueError("scene has no planes");
  const LightingAsset& light = assets.light(scene.hdr_id);
  std::vector<ImageBuffer> layers;
  for (const auto& p : scene.planes) layers.push_back(render_layer(p, scene, assets));

  std::vector<ImageBuffer> images;
  std::vector<double> focus;
  for (const auto& p : scene.planes) {
    images.push_back(composite_layers(scene, layers, plane_radii(scene, p.distance), light));
    focus.push_back(p.distance);
  }
  RenderedSample out;
  out.ground_truth = composite_layers(scene, layers, std::vector<double>(scene.planes.size(), 0.0), light);
  out.stack = FocusStack(std::move(images), std::move(focus));
  out.scene = scene;
  return out;
}

}  // namespace latfuse::datagen
