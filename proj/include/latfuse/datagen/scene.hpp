#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "latfuse/core/error.hpp"
#include "latfuse/core/random.hpp"
#include "latfuse/datagen/assets.hpp"

namespace latfuse::datagen {

inline constexpr double kBackgroundDistance = 10.0;

struct PlaneSpec {
  double distance = 1.0;          // metres from the camera
  double scale = 1.0;             // subject height as a fraction of frame height
  double rotation_deg = 0.0;      // in-plane rotation
  std::array<double, 2> position = {0.5, 0.5};  // subject centre, normalized (x, y)
  std::string texture_id;
  bool background = false;

  friend bool operator==(const PlaneSpec&, const PlaneSpec&) = default;
};

struct SceneSpec {
  double f_stop = 1.0;
  double focal_length_mm = 100.0;
  double sensor_width_mm = 36.0;
  std::vector<PlaneSpec> planes;  // subjects in sampled order, background last
  std::string hdr_id;
  int resolution = 256;
  std::uint64_t seed = 0;

  std::size_t subject_count() const noexcept { return planes.empty() ? 0 : planes.size() - 1; }
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Sampling ranges. Defaults follow the generator's published ranges; the
/// placement ranges (position, scale, rotation) are implementation choices.
struct SceneSampling {
  int subjects_per_scene = 5;
  int resolution = 256;
  double sensor_width_mm = 36.0;
  std::array<double, 2> f_stop = {0.1, 1.5};
  std::array<double, 2> focal_length_mm = {90.0, 120.0};
  std::array<double, 2> subject_distance = {1.0, 9.5};
  std::array<double, 2> scale = {0.3, 1.0};
  double max_rotation_deg = 15.0;
  std::array<double, 2> position = {0.2, 0.8};

  void validate() const {
    if (subjects_per_scene < 1) throw ValueError("subjects_per_scene must be >= 1");
    if (resolution < 8) throw ValueError("resolution must be >= 8");
    auto ordered = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
    if (!ordered(f_stop) || !ordered(focal_length_mm) || !ordered(subject_distance) || !ordered(scale) ||
        !ordered(position))
      throw ValueError("sampling ranges must be [lo, hi] with lo <= hi");
    if (f_stop[0] <= 0.0 || scale[0] <= 0.0 || sensor_width_mm <= 0.0) throw ValueError("non-positive sampling range");
    if (subject_distance[1] >= kBackgroundDistance)
      throw ValueError("subject planes must lie in front of the background");
    if (subject_distance[0] * 1000.0 <= focal_length_mm[1])
      throw ValueError("subject distances must exceed the focal length");
  }

  friend bool operator==(const SceneSampling&, const SceneSampling&) = default;
};

/// Draws one scene. With `forced_subjects`, those subject ids are used in
/// order instead of drawing from the catalog (no-reuse evaluation profile).
inline SceneSpec sample_scene(std::uint64_t seed, const AssetCatalog& catalog, const SceneSampling& opts = {},
                              const std::vector<std::string>* forced_subjects = nullptr) {
  opts.validate();
  const auto n = static_cast<std::size_t>(opts.subjects_per_scene);
  if (!forced_subjects && catalog.subjects.size() < n)
    throw AssetError("catalog has " + std::to_string(catalog.subjects.size()) + " subjects, scene needs " +
                     std::to_string(n));
  if (forced_subjects && forced_subjects->size() != n) throw ValueError("forced subject list has the wrong length");
  if (catalog.backgrounds.empty()) throw AssetError("catalog has no backgrounds");
  if (catalog.lighting.empty()) throw AssetError("catalog has no lighting presets");

  Rng rng(seed);
  SceneSpec s;
  s.seed = seed;
  s.resolution = opts.resolution;
  s.sensor_width_mm = opts.sensor_width_mm;
  s.f_stop = rng.uniform(opts.f_stop[0], opts.f_stop[1]);
  s.focal_length_mm = rng.uniform(opts.focal_length_mm[0], opts.focal_length_mm[1]);
  s.hdr_id = catalog.lighting[rng.below(catalog.lighting.size())].id;

  std::vector<std::size_t> picks;
  if (!forced_subjects) {
    std::vector<std::size_t> order(catalog.subjects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    PlaneSpec p;
    p.position = {rng.uniform(opts.position[0], opts.position[1]), rng.uniform(opts.position[0], opts.position[1])};
    p.scale = rng.uniform(opts.scale[0], opts.scale[1]);
    p.distance = rng.uniform(opts.subject_distance[0], opts.subject_distance[1]);
    p.texture_id = forced_subjects ? (*forced_subjects)[i] : catalog.subjects[picks[i]].id;
    p.rotation_deg = rng.uniform(-opts.max_rotation_deg, opts.max_rotation_deg);
    s.planes.push_back(std::move(p));
  }
  PlaneSpec bg;
  bg.distance = kBackgroundDistance;
  bg.background = true;
  bg.texture_id = catalog.backgrounds[rng.below(catalog.backgrounds.size())].id;
  s.planes.push_back(std::move(bg));
  return s;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline nlohmann::json to_json(const PlaneSpec& p) {
  return {{"distance", p.distance},   {"scale", p.scale},           {"rotation_deg", p.rotation_deg},
          {"position", p.position},   {"texture_id", p.texture_id}, {"background", p.background}};
}

inline nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json planes = nlohmann::json::array();
  for (const auto& p : s.planes) planes.push_back(to_json(p));
  return {{"f_stop", s.f_stop},
          {"focal_length_mm", s.focal_length_mm},
          {"sensor_width_mm", s.sensor_width_mm},
          {"planes", planes},
          {"hdr_id", s.hdr_id},
          {"resolution", s.resolution},
          {"seed", s.seed}};
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    s.f_stop = j.at("f_stop");
    s.focal_length_mm = j.at("focal_length_mm");
    s.sensor_width_mm = j.at("sensor_width_mm");
    s.hdr_id = j.at("hdr_id");
    s.resolution = j.at("resolution");
    s.seed = j.at("seed");
    for (const auto& pj : j.at("planes")) {
      PlaneSpec p;
      p.distance = pj.at("distance");
      p.scale = pj.at("scale");
      p.rotation_deg = pj.at("rotation_deg");
      p.position = pj.at("position").get<std::array<double, 2>>();
      p.texture_id = pj.at("texture_id");
      p.background = pj.at("background");
      s.planes.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValueError("malformed scene record: " + std::string(e.what()));
  }
  return s;
}

/// Canonical text of a scene record; identical scenes give identical bytes.
inline std::string serialize_scene(const SceneSpec& s) { return to_json(s).dump(2) + "\n"; }

}  // namespace latfuse::datagen
