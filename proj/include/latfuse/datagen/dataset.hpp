#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/core/image_io.hpp"
#include "latfuse/core/random.hpp"
#include "latfuse/datagen/assets.hpp"
#include "latfuse/datagen/blender_script.hpp"
#include "latfuse/datagen/render.hpp"
#include "latfuse/datagen/scene.hpp"
#include "latfuse/fusion/train.hpp"

namespace latfuse::datagen {

struct DatasetProfile {
  std::string name = "train";
  SceneSampling sampling;
  /// Every subject asset appears in at most one plane across the dataset.
  bool unique_subjects = false;
  bool emit_blender_scripts = false;

  friend bool operator==(const DatasetProfile&, const DatasetProfile&) = default;
};

inline DatasetProfile training_profile() { return {}; }

inline DatasetProfile evaluation_profile() {
  DatasetProfile p;
  p.name = "eval";
  p.unique_subjects = true;
  return p;
}

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<std::string> stack;  // paths relative to the dataset root
  std::vector<double> focus_distances;
  std::string ground_truth;
  std::string scene;
  std::string blender_script;  // empty unless emitted
};

struct Manifest {
  std::uint64_t master_seed = 0;
  std::string profile;
  int resolution = 0;
  std::vector<ManifestEntry> samples;
};

/// Raised when a no-reuse profile runs out of subjects.
class AssetExhaustedError : public AssetError {
 public:
  AssetExhaustedError(std::size_t sample_index, const std::string& msg)
      : AssetError(msg), sample_index_(sample_index) {}
  std::size_t sample_index() const noexcept { return sample_index_; }

 private:
  std::size_t sample_index_;
};

inline std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05zu", i);
  return buf;
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : m.samples) {
    nlohmann::json j = {{"id", e.id},
                        {"seed", e.seed},
                        {"stack", e.stack},
                        {"focus_distances", e.focus_distances},
                        {"ground_truth", e.ground_truth},
                        {"scene", e.scene}};
    if (!e.blender_script.empty()) j["blender_script"] = e.blender_script;
    samples.push_back(std::move(j));
  }
  return {{"version", 1},
          {"master_seed", m.master_seed},
          {"profile", m.profile},
          {"resolution", m.resolution},
          {"samples", samples}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.master_seed = j.at("master_seed");
    m.profile = j.at("profile");
    m.resolution = j.at("resolution");
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id");
      e.seed = s.at("seed");
      e.stack = s.at("stack").get<std::vector<std::string>>();
      e.focus_distances = s.at("focus_distances").get<std::vector<double>>();
      e.ground_truth = s.at("ground_truth");
      e.scene = s.at("scene");
      e.blender_script = s.value("blender_script", std::string{});
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest: " + std::string(e.what()));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse manifest " + path.string() + ": " + e.what());
  }
}

/// Renders `count` scenes into `out_dir`:
///
///     <out>/<sample_id>/stack_0..n.png, gt.png, scene.json
///     <out>/<sample_id>.py            (when blender scripts are enabled)
///     <out>/manifest.json
///
/// Scene i uses seed derive_seed(master_seed, i). Under a unique-subject
/// profile the subject pool is shuffled once from the master seed and handed
/// out in order.
inline Manifest generate_dataset(std::size_t count, std::uint64_t master_seed, const std::filesystem::path& out_dir,
                                 const DatasetProfile& profile, const AssetCatalog& catalog) {
  if (count < 1) throw ValueError("dataset count must be >= 1");
  profile.sampling.validate();
  std::filesystem::create_directories(out_dir);
  Manifest manifest;
  manifest.master_seed = master_seed;
  manifest.profile = profile.name;
  manifest.resolution = profile.sampling.resolution;

  std::vector<std::string> pool;
  std::size_t next_subject = 0;
  if (profile.unique_subjects) {
    for (const auto& s : catalog.subjects) pool.push_back(s.id);
    Rng pool_rng(derive_seed(master_seed, ~0ull));
    pool_rng.shuffle(pool);
  }
  const auto per_scene = static_cast<std::size_t>(profile.sampling.subjects_per_scene);

  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    SceneSpec scene;
    if (profile.unique_subjects) {
      if (next_subject + per_scene > pool.size())
        throw AssetExhaustedError(i, "subject pool exhausted at sample " + std::to_string(i) + " of " +
                                         std::to_string(count) + " (" + std::to_string(pool.size()) +
                                         " unique subjects)");
      const std::vector<std::string> forced(pool.begin() + static_cast<std::ptrdiff_t>(next_subject),
                                            pool.begin() + static_cast<std::ptrdiff_t>(next_subject + per_scene));
      next_subject += per_scene;
      scene = sample_scene(seed, catalog, profile.sampling, &forced);
    } else {
      scene = sample_scene(seed, catalog, profile.sampling);
    }
    const RenderedSample sample = render_stack(scene, catalog);

    ManifestEntry e;
    e.id = sample_id(i);
    e.seed = seed;
    const std::filesystem::path dir = out_dir / e.id;
    for (std::size_t k = 0; k < sample.stack.size(); ++k) {
      const std::string rel = e.id + "/stack_" + std::to_string(k) + ".png";
      io::write_png(out_dir / rel, sample.stack[k]);
      e.stack.push_back(rel);
    }
    e.focus_distances = sample.stack.focus_distances();
    e.ground_truth = e.id + "/gt.png";
    io::write_png(out_dir / e.ground_truth, sample.ground_truth);
    e.scene = e.id + "/scene.json";
    write_text_atomic(out_dir / e.scene, serialize_scene(scene));
    if (profile.emit_blender_scripts) {
      e.blender_script = e.id + ".py";
      write_text_atomic(out_dir / e.blender_script, emit_blender_script(scene));
    }
    manifest.samples.push_back(std::move(e));
  }
  write_text_atomic(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

/// Reads every sample of a manifest back as (stack, ground truth) pairs.
inline std::vector<TrainingPair> load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  std::vector<TrainingPair> out;
  for (const auto& e : m.samples) {
    std::vector<ImageBuffer> imgs;
    for (const auto& p : e.stack) imgs.push_back(io::read_png(root / p, 3));
    out.push_back({FocusStack(std::move(imgs), e.focus_distances), io::read_png(root / e.ground_truth, 3)});
  }
  return out;
}

}  // namespace latfuse::datagen
