#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/core/image_io.hpp"
#include "latfuse/core/random.hpp"

namespace latfuse::datagen {

/// Cut-out subject: RGBA, straight (non-premultiplied) alpha.
struct SubjectAsset {
  std::string id;
  ImageBuffer rgba;
};

struct BackgroundAsset {
  std::string id;
  ImageBuffer rgb;
};

/// Stand-in for an environment map: a global gain and per-channel tint.
struct LightingAsset {
  std::string id;
  double gain = 1.0;
  std::array<double, 3> tint = {1.0, 1.0, 1.0};
  std::string hdr_path;  // environment map handed to the external renderer, if any
};

/// Subjects, backgrounds and lighting presets available to the scene sampler.
///
/// On disk a catalog is a directory with `index.json`:
///
///     {
///       "subjects":    [{"id": "s0", "path": "subjects/s0.png"}, ...],   // RGBA PNG
///       "backgrounds": [{"id": "b0", "path": "backgrounds/b0.png"}, ...], // RGB PNG
///       "lighting":    [{"id": "l0", "gain": 1.0, "tint": [1, 1, 1], "hdr": "hdri/l0.exr"}, ...]
///     }
///
/// Paths are relative to the catalog directory; "hdr" is optional.
struct AssetCatalog {
  std::vector<SubjectAsset> subjects;
  std::vector<BackgroundAsset> backgrounds;
  std::vector<LightingAsset> lighting;

  const SubjectAsset& subject(const std::string& id) const {
    for (const auto& s : subjects)
      if (s.id == id) return s;
    throw AssetError("unknown subject asset '" + id + "'");
  }
  const BackgroundAsset& background(const std::string& id) const {
    for (const auto& b : backgrounds)
      if (b.id == id) return b;
    throw AssetError("unknown background asset '" + id + "'");
  }
  const LightingAsset& light(const std::string& id) const {
    for (const auto& l : lighting)
      if (l.id == id) return l;
    throw AssetError("unknown lighting asset '" + id + "'");
  }
};

inline AssetCatalog load_catalog(const std::filesystem::path& dir) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text(dir / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw AssetError("cannot parse " + (dir / "index.json").string() + ": " + e.what());
  } catch (const IoError& e) {
    throw AssetError(e.what());
  }
  AssetCatalog cat;
  try {
    for (const auto& s : index.at("subjects")) {
      const std::string id = s.at("id");
      cat.subjects.push_back({id, io::read_png(dir / s.at("path").get<std::string>(), 4)});
    }
    for (const auto& b : index.at("backgrounds")) {
      const std::string id = b.at("id");
      cat.backgrounds.push_back({id, io::read_png(dir / b.at("path").get<std::string>(), 3)});
    }
    for (const auto& l : index.at("lighting")) {
      LightingAsset a;
      a.id = l.at("id");
      a.gain = l.value("gain", 1.0);
      if (l.contains("tint")) a.tint = l.at("tint").get<std::array<double, 3>>();
      a.hdr_path = l.value("hdr", std::string{});
      cat.lighting.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw AssetError("malformed catalog index: " + std::string(e.what()));
  } catch (const IoError& e) {
    throw AssetError(e.what());
  }
  return cat;
}

inline void save_catalog(const AssetCatalog& cat, const std::filesystem::path& dir) {
  nlohmann::json index;
  index["subjects"] = nlohmann::json::array();
  index["backgrounds"] = nlohmann::json::array();
  index["lighting"] = nlohmann::json::array();
  for (const auto& s : cat.subjects) {
    const std::string rel = "subjects/" + s.id + ".png";
    io::write_png(dir / rel, s.rgba);
    index["subjects"].push_back({{"id", s.id}, {"path", rel}});
  }
  for (const auto& b : cat.backgrounds) {
    const std::string rel = "backgrounds/" + b.id + ".png";
    io::write_png(dir / rel, b.rgb);
    index["backgrounds"].push_back({{"id", b.id}, {"path", rel}});
  }
  for (const auto& l : cat.lighting) {
    nlohmann::json j = {{"id", l.id}, {"gain", l.gain}, {"tint", l.tint}};
    if (!l.hdr_path.empty()) j["hdr"] = l.hdr_path;
    index["lighting"].push_back(j);
  }
  write_text_atomic(dir / "index.json", index.dump(2) + "\n");
}

namespace detail {

// Sum of a few random plane waves plus value noise: enough high-frequency
// detail for defocus to be visible.
inline ImageBuffer procedural_texture(int size, Rng& rng) {
  ImageBuffer img(size, size, 3);
  struct Wave {
    double fx, fy, phase, amp;
    std::array<double, 3> color;
  };
  std::vector<Wave> waves(6);
  for (auto& w : waves) {
    const double freq = rng.uniform(0.05, 0.6);
    const double ang = rng.uniform(0.0, 6.283185307179586);
    w = {freq * std::cos(ang), freq * std::sin(ang), rng.uniform(0.0, 6.283185307179586), rng.uniform(0.3, 1.0),
         {rng.uniform(), rng.uniform(), rng.uniform()}};
  }
  const std::array<double, 3> base = {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
  const int cell = 1 + static_cast<int>(rng.below(4));
  std::vector<double> noise(static_cast<std::size_t>((size / cell + 2) * (size / cell + 2)));
  for (double& v : noise) v = rng.uniform(-1.0, 1.0);
  const int stride = size / cell + 2;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double n = noise[static_cast<std::size_t>((y / cell) * stride + x / cell)];
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + 0.08 * n;
        for (const auto& w : waves) v += 0.12 * w.amp * w.color[c] * std::sin(w.fx * x + w.fy * y + w.phase);
        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return img;
}

// Star-shaped blob matte with soft 1-pixel edge.
inline ImageBuffer procedural_matte(int size, Rng& rng) {
  ImageBuffer m(size, size, 1);
  const int lobes = 2 + static_cast<int>(rng.below(5));
  const double depth = rng.uniform(0.05, 0.3), phase = rng.uniform(0.0, 6.283185307179586);
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = x - c, dy = y - c;
      const double r = std::hypot(dx, dy) / (size / 2.0);
      const double ang = std::atan2(dy, dx);
      const double edge = 0.92 * (1.0 - depth + depth * std::cos(lobes * ang + phase));
      m.at(y, x) = static_cast<float>(std::clamp((edge - r) * size / 2.0 + 0.5, 0.0, 1.0));
    }
  return m;
}

}  // namespace detail

/// Synthetic catalog of textured blob cut-outs and textured backgrounds, for
/// runs without downloaded matting datasets. Deterministic in `seed`.
inline AssetCatalog procedural_catalog(std::uint64_t seed, int subjects = 16, int backgrounds = 4, int lighting = 10,
                                       int texture_size = 96) {
  if (subjects < 1 || backgrounds < 1 || lighting < 1 || texture_size < 8)
    throw ValueError("procedural catalog needs at least one asset of each kind");
  Rng rng(seed);
  AssetCatalog cat;
  for (int i = 0; i < subjects; ++i) {
    const ImageBuffer tex = detail::procedural_texture(texture_size, rng);
    const ImageBuffer matte = detail::procedural_matte(texture_size, rng);
    ImageBuffer rgba(texture_size, texture_size, 4);
    for (int y = 0; y < texture_size; ++y)
      for (int x = 0; x < texture_size; ++x) {
        for (int c = 0; c < 3; ++c) rgba.at(y, x, c) = tex.at(y, x, c);
        rgba.at(y, x, 3) = matte.at(y, x);
      }
    cat.subjects.push_back({"subject_" + std::to_string(i), std::move(rgba)});
  }
  for (int i = 0; i < backgrounds; ++i)
    cat.backgrounds.push_back({"background_" + std::to_string(i), detail::procedural_texture(texture_size * 2, rng)});
  for (int i = 0; i < lighting; ++i) {
    LightingAsset l;
    l.id = "light_" + std::to_string(i);
    l.gain = rng.uniform(0.85, 1.15);
    for (double& t : l.tint) t = rng.uniform(0.92, 1.08);
    cat.lighting.push_back(l);
  }
  return cat;
}

}  // namespace latfuse::datagen
