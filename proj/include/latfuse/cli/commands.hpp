#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "latfuse/codec/codec.hpp"
#include "latfuse/codec/tiny_autoencoder.hpp"
#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/core/image_io.hpp"
#include "latfuse/datagen/dataset.hpp"
#include "latfuse/eval/benchmark.hpp"
#include "latfuse/eval/difficulty.hpp"
#include "latfuse/eval/metrics.hpp"
#include "latfuse/eval/report.hpp"
#include "latfuse/fusion/checkpoint.hpp"
#include "latfuse/fusion/pipeline.hpp"

namespace latfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Process exit codes, one per failure class.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,      // bad flags, config file or parameter values
  kExitInput = 3,       // missing or unreadable input files
  kExitAsset = 4,       // asset catalog problems, including pool exhaustion
  kExitShape = 5,       // image / latent / codec dimension mismatch
  kExitDivergence = 6,  // non-finite training loss
};

/// Maps the library's error types to exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const AssetError*>(&e)) return kExitAsset;
  if (dynamic_cast<const ShapeError*>(&e)) return kExitShape;
  if (dynamic_cast<const IoError*>(&e)) return kExitInput;
  if (dynamic_cast<const ValueError*>(&e)) return kExitConfig;
  return kExitInternal;
}

// --- codec selection ------------------------------------------------------

/// "identity", "space_to_depth" (with factor) or "taesd" (with weights file).
struct CodecSpec {
  std::string name = "identity";
  int factor = 2;  // space_to_depth only
  std::string weights;
  int latent_channels = 16;  // taesd only

  json to_json() const {
    return {{"name", name}, {"factor", factor}, {"weights", weights}, {"latent_channels", latent_channels}};
  }
};

inline std::unique_ptr<Codec> make_codec(const CodecSpec& spec) {
  if (spec.name == "identity") return std::make_unique<IdentityCodec>();
  if (spec.name == "space_to_depth") return std::make_unique<SpaceToDepthCodec>(spec.factor);
  if (spec.name == "taesd") {
    if (spec.weights.empty()) throw ValueError("codec 'taesd' needs a weights file (--codec-weights)");
    if (!fs::exists(spec.weights)) throw IoError("codec weights file not found: " + spec.weights);
    return std::make_unique<TinyAutoencoderCodec>(TinyAutoencoderCodec::from_file(spec.weights, spec.latent_channels));
  }
  throw ValueError("unknown codec '" + spec.name + "' (expected identity, space_to_depth or taesd)");
}

/// Codec spec recorded in a checkpoint, with an optional weights override.
inline CodecSpec codec_from_checkpoint(const std::string& recorded, const CodecSpec& override_spec) {
  if (recorded.empty()) return override_spec;
  CodecSpec s = override_spec;
  const json j = json::parse(recorded, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    s.name = recorded;
    return s;
  }
  s.name = j.value("name", s.name);
  s.factor = j.value("factor", s.factor);
  s.latent_channels = j.value("latent_channels", s.latent_channels);
  if (s.weights.empty()) s.weights = j.value("weights", std::string{});
  return s;
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw IoError(what + " not found: " + p.string());
}

// --- generate -------------------------------------------------------------

struct GenerateConfig {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string profile = "train";  // train | eval
  std::string assets;             // catalog directory; empty → procedural catalog
  std::uint64_t procedural_seed = 0;
  int procedural_subjects = 64;
  int resolution = 256;
  int subjects_per_scene = 5;
  double min_distance = 1.0;
  double max_distance = 9.5;
  bool blender_scripts = false;
};

inline json cmd_generate(const GenerateConfig& cfg) {
  if (cfg.out.empty()) throw ValueError("generate: output directory is required");
  if (cfg.profile != "train" && cfg.profile != "eval") throw ValueError("generate: profile must be train or eval");
  const datagen::AssetCatalog catalog =
      cfg.assets.empty() ? datagen::procedural_catalog(cfg.procedural_seed, cfg.procedural_subjects)
                         : datagen::load_catalog(cfg.assets);
  datagen::DatasetProfile profile = cfg.profile == "eval" ? datagen::evaluation_profile() : datagen::training_profile();
  profile.sampling.resolution = cfg.resolution;
  profile.sampling.subjects_per_scene = cfg.subjects_per_scene;
  profile.sampling.subject_distance = {cfg.min_distance, cfg.max_distance};
  profile.emit_blender_scripts = cfg.blender_scripts;
  const datagen::Manifest m = datagen::generate_dataset(cfg.count, cfg.seed, cfg.out, profile, catalog);
  return {{"command", "generate"},
          {"manifest", (fs::path(cfg.out) / "manifest.json").string()},
          {"samples", m.samples.size()},
          {"images_per_sample", cfg.subjects_per_scene + 2}};
}

// --- train ----------------------------------------------------------------

struct TrainCmdConfig {
  std::string data;  // manifest.json
  std::string out;   // checkpoint path
  std::string resume;
  std::string log_csv;
  CodecSpec codec;
  FusionNetConfig network;
  TrainConfig train;
  long long checkpoint_every = 0;
};

inline std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string s = "step,loss,wall_seconds\n";
  for (const auto& r : rows)
    s += std::to_string(r.step) + "," + datagen::format_number(r.loss) + "," + datagen::format_number(r.wall_seconds) +
         "\n";
  return s;
}

inline json cmd_train(const TrainCmdConfig& cfg, std::ostream& log = std::cerr) {
  if (cfg.out.empty()) throw ValueError("train: checkpoint output path is required");
  require_file(cfg.data, "training manifest");
  const auto codec = make_codec(cfg.codec);
  const auto data = datagen::load_dataset(cfg.data);

  std::optional<TrainState<float>> state;
  if (!cfg.resume.empty()) {
    require_file(cfg.resume, "checkpoint");
    state.emplace(load_checkpoint(cfg.resume).state);
    state->config.steps = cfg.train.steps;
  } else {
    FusionNetConfig net = cfg.network;
    net.latent_channels = codec->descriptor().latent_channels;
    state.emplace(net, cfg.train);
  }
  const std::string codec_record = cfg.codec.to_json().dump();
  std::vector<TrainLogRow> rows;
  const auto chunk = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : cfg.train.steps;
  const long long target = state->config.steps;
  while (state->step < target) {
    state->config.steps = std::min(target, state->step + chunk);
    auto part = train(*state, data, *codec, [&](const TrainLogRow& r) {
      log << "step " << r.step << " loss " << r.loss << " t " << r.wall_seconds << "s\n";
    });
    rows.insert(rows.end(), part.begin(), part.end());
    save_checkpoint(cfg.out, *state, codec_record);
  }
  state->config.steps = target;
  save_checkpoint(cfg.out, *state, codec_record);
  if (!cfg.log_csv.empty()) write_text_atomic(cfg.log_csv, train_log_csv(rows));
  return {{"command", "train"},
          {"checkpoint", cfg.out},
          {"steps", state->step},
          {"final_loss", rows.empty() ? 0.0 : rows.back().loss},
          {"network", to_json(state->net.config())},
          {"train", to_json(state->config)},
          {"codec", cfg.codec.to_json()}};
}

// --- fuse -----------------------------------------------------------------

struct FuseConfig {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string out;
  int patch_size = 64;
  bool use_ema = true;
  CodecSpec codec;  // weights override for the checkpoint's codec
  std::string debug_dir;
};

/// Writes the stitching weight-sum map and every per-patch mask, scaled to [0,1].
inline void write_tiling_debug(const fs::path& dir, const PatchPlan& plan, const ImageBuffer& weight_map) {
  ImageBuffer w = weight_map;
  float hi = 0.0f;
  for (float v : w.values()) hi = std::max(hi, v);
  if (hi > 0.0f)
    for (float& v : w.values()) v /= hi;
  io::write_png(dir / "weight_sum.png", w);
  for (std::size_t i = 0; i < plan.rects.size(); ++i) {
    const PatchRect& r = plan.rects[i];
    const auto mask = patch_weight_mask(r, plan);
    ImageBuffer full(plan.image_height, plan.image_width, 1, 0.0f);
    for (int y = 0; y < r.size; ++y)
      for (int x = 0; x < r.size; ++x) full.at(r.top + y, r.left + x) = mask.at(y, x);
    char name[32];
    std::snprintf(name, sizeof name, "mask_%03zu.png", i);
    io::write_png(dir / name, full);
  }
}

inline json cmd_fuse(const FuseConfig& cfg) {
  if (cfg.inputs.empty() || cfg.inputs.size() > static_cast<std::size_t>(kMaxStackSize))
    throw ValueError("fuse: give 1 to 7 input images");
  if (cfg.out.empty()) throw ValueError("fuse: output path is required");
  require_file(cfg.checkpoint, "checkpoint");
  std::vector<ImageBuffer> imgs;
  for (const auto& p : cfg.inputs) {
    require_file(p, "input image");
    imgs.push_back(io::read_image(p));
  }
  const FocusStack stack = FocusStack::with_unit_distances(std::move(imgs));
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const CodecSpec spec = codec_from_checkpoint(ck.codec_name, cfg.codec);
  const auto codec = make_codec(spec);
  const FusionNet<float> net = cfg.use_ema ? ck.state.ema_net() : ck.state.net;
  ImageBuffer weights;
  const TilingConfig tiling{cfg.patch_size};
  const ImageBuffer fused = fuse(stack, *codec, tiling, net, &weights);
  io::write_image(cfg.out, fused);
  json summary = {{"command", "fuse"},
                  {"output", cfg.out},
                  {"inputs", cfg.inputs.size()},
                  {"height", fused.height()},
                  {"width", fused.width()},
                  {"use_ema", cfg.use_ema},
                  {"codec", spec.to_json()}};
  if (!cfg.debug_dir.empty()) {
    fs::create_directories(cfg.debug_dir);
    write_tiling_debug(cfg.debug_dir, fusion_patch_plan(stack.height(), stack.width(), codec->descriptor(), tiling),
                       weights);
    summary["debug_dir"] = cfg.debug_dir;
  }
  return summary;
}

// --- eval -----------------------------------------------------------------

struct EvalConfig {
  std::string checkpoint;  // optional when fused_dir is given
  std::string data;        // test manifest
  std::string out;         // report directory
  std::string fused_dir;   // pre-fused <id>.png images instead of running the network
  std::string method = "latfuse";
  int patch_size = 64;
  int difficulty_patch = 64;
  std::vector<double> thresholds = {0.0, 1e-4, 1e-3, 3e-3, 1e-2};
  bool use_ema = true;
  CodecSpec codec;
  std::string lpips_cmd;  // external scorer: `<cmd> fused.png gt.png` prints one number
};

/// Runs an external scorer executable on a pair of images and parses one number from stdout.
inline eval::ExternalMetric external_command_metric(const std::string& name, const std::string& command,
                                                    const fs::path& scratch_dir) {
  return {name, false, [=](const ImageBuffer& fused, const ImageBuffer& gt) {
            fs::create_directories(scratch_dir);
            const fs::path a = scratch_dir / "fused.png", b = scratch_dir / "gt.png";
            io::write_png(a, fused);
            io::write_png(b, gt);
            const std::string line = command + " '" + a.string() + "' '" + b.string() + "'";
            FILE* pipe = ::popen(line.c_str(), "r");
            if (!pipe) throw IoError("cannot run external metric: " + command);
            char buf[256] = {};
            const bool got = std::fgets(buf, sizeof buf, pipe) != nullptr;
            const int rc = ::pclose(pipe);
            if (!got || rc != 0) throw IoError("external metric failed: " + command);
            return std::stod(buf);
          }};
}

inline json cmd_eval(const EvalConfig& cfg) {
  if (cfg.out.empty()) throw ValueError("eval: output directory is required");
  require_file(cfg.data, "test manifest");
  if (cfg.fused_dir.empty() && cfg.checkpoint.empty()) throw ValueError("eval: need a checkpoint or --fused-dir");
  fs::create_directories(cfg.out);
  const fs::path manifest_path(cfg.data);
  const datagen::Manifest manifest = datagen::load_manifest(manifest_path);
  const auto pairs = datagen::load_dataset(manifest_path);

  std::unique_ptr<Codec> codec;
  std::optional<FusionNet<float>> net;
  if (cfg.fused_dir.empty()) {
    require_file(cfg.checkpoint, "checkpoint");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    codec = make_codec(codec_from_checkpoint(ck.codec_name, cfg.codec));
    net.emplace(cfg.use_ema ? ck.state.ema_net() : ck.state.net);
  }
  std::vector<eval::ExternalMetric> plugins;
  if (!cfg.lpips_cmd.empty())
    plugins.push_back(external_command_metric("lpips", cfg.lpips_cmd, fs::path(cfg.out) / ".scratch"));

  std::vector<eval::ImageMetrics> fused_rows, best_input_rows;
  std::vector<eval::PatchScore> mse_scores, ssim_scores;
  const eval::PatchMetric mse_metric = [](const ImageBuffer& f, const ImageBuffer& g) { return eval::mse(f, g); };
  const eval::PatchMetric ssim_metric = [](const ImageBuffer& f, const ImageBuffer& g) { return eval::ssim(f, g); };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& id = manifest.samples[i].id;
    const auto& p = pairs[i];
    ImageBuffer fused;
    if (net) {
      fused = fuse(p.stack, *codec, {cfg.patch_size}, *net);
    } else {
      const fs::path f = fs::path(cfg.fused_dir) / (id + ".png");
      require_file(f, "fused image");
      fused = io::read_png(f, 3);
    }
    fused_rows.push_back({id, eval::full_reference_metrics(fused, p.ground_truth, plugins)});
    std::size_t best = 0;
    double best_psnr = -1.0;
    for (std::size_t k = 0; k < p.stack.size(); ++k) {
      const double v = eval::psnr(p.stack[k], p.ground_truth);
      if (v > best_psnr) best_psnr = v, best = k;
    }
    best_input_rows.push_back({id, eval::full_reference_metrics(p.stack[best], p.ground_truth)});
    const auto ms = eval::score_patches(fused, p.ground_truth, p.stack, cfg.difficulty_patch, mse_metric);
    const auto ss = eval::score_patches(fused, p.ground_truth, p.stack, cfg.difficulty_patch, ssim_metric);
    mse_scores.insert(mse_scores.end(), ms.begin(), ms.end());
    ssim_scores.insert(ssim_scores.end(), ss.begin(), ss.end());
  }
  const auto mse_bins = eval::bin_scores(mse_scores, cfg.thresholds);
  const auto ssim_bins = eval::bin_scores(ssim_scores, cfg.thresholds);
  const fs::path out(cfg.out);
  write_text_atomic(out / "metrics.csv", eval::metrics_csv(fused_rows));
  write_text_atomic(out / "best_input_metrics.csv", eval::metrics_csv(best_input_rows));
  write_text_atomic(out / "difficulty_mse.csv", eval::bins_csv("mse", mse_bins));
  write_text_atomic(out / "difficulty_ssim.csv", eval::bins_csv("ssim", ssim_bins));
  const std::string table = eval::aggregate_table({{cfg.method, fused_rows}, {"best input", best_input_rows}});
  write_text_atomic(out / "table.md", table);
  io::write_png(out / "difficulty_mse.png", eval::plot_bins(mse_bins));

  json aggregate = json::object();
  for (std::size_t k = 0; k < fused_rows.front().metrics.size(); ++k) {
    double sum = 0.0;
    for (const auto& r : fused_rows) sum += r.metrics[k].value;
    aggregate[fused_rows.front().metrics[k].name] = sum / static_cast<double>(fused_rows.size());
  }
  json bins = json::array();
  for (const auto& b : mse_bins) bins.push_back({{"threshold", b.threshold}, {"patch_count", b.patch_count}});
  return {{"command", "eval"},
          {"samples", fused_rows.size()},
          {"aggregate", aggregate},
          {"bins", bins},
          {"reports",
           {(out / "metrics.csv").string(), (out / "best_input_metrics.csv").string(),
            (out / "difficulty_mse.csv").string(), (out / "difficulty_ssim.csv").string(),
            (out / "table.md").string(), (out / "difficulty_mse.png").string()}}};
}

// --- bench ----------------------------------------------------------------

struct BenchConfig {
  std::string checkpoint;  // optional; a freshly initialized network otherwise
  std::string out;         // CSV path
  std::string plot;        // optional PNG
  CodecSpec codec;
  FusionNetConfig network;  // used without a checkpoint
  int min_inputs = 2;
  int max_inputs = 7;
  int trials = 3;
  int warmup = 1;
  int resolution = eval::kBenchmarkResolution;
  int patch_size = 64;
  bool include_noop = false;
};

inline json cmd_bench(const BenchConfig& cfg) {
  if (cfg.out.empty()) throw ValueError("bench: output CSV path is required");
  if (cfg.min_inputs < 1 || cfg.max_inputs > kMaxStackSize || cfg.min_inputs > cfg.max_inputs)
    throw ValueError("bench: input counts must satisfy 1 <= min <= max <= 7");
  std::unique_ptr<Codec> codec;
  std::optional<FusionNet<float>> net;
  if (!cfg.checkpoint.empty()) {
    require_file(cfg.checkpoint, "checkpoint");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    codec = make_codec(codec_from_checkpoint(ck.codec_name, cfg.codec));
    net.emplace(ck.state.ema_net());
  } else {
    codec = make_codec(cfg.codec);
    FusionNetConfig nc = cfg.network;
    nc.latent_channels = codec->descriptor().latent_channels;
    net.emplace(nc);
  }
  std::vector<int> ns;
  for (int n = cfg.min_inputs; n <= cfg.max_inputs; ++n) ns.push_back(n);
  const TilingConfig tiling{cfg.patch_size};
  eval::BenchmarkReport report = eval::throughput_benchmark(
      "latfuse", [&](const FocusStack& s) { (void)fuse(s, *codec, tiling, *net); }, ns, cfg.trials, cfg.warmup,
      cfg.resolution);
  if (cfg.include_noop) {
    const auto noop =
        eval::throughput_benchmark("noop", [](const FocusStack&) {}, ns, cfg.trials, cfg.warmup, cfg.resolution);
    report.rows.insert(report.rows.end(), noop.rows.begin(), noop.rows.end());
  }
  write_text_atomic(cfg.out, eval::throughput_csv(report));
  if (!cfg.plot.empty()) io::write_png(cfg.plot, eval::plot_throughput(report));
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"method", r.method_id}, {"n_inputs", r.n_inputs}, {"images_per_second", r.images_per_second},
                    {"spread", r.spread}});
  return {{"command", "bench"},
          {"csv", cfg.out},
          {"rows", rows},
          {"environment",
           {{"hardware_id", report.environment.hardware_id},
            {"hardware_threads", report.environment.hardware_threads},
            {"trials", report.environment.trials},
            {"warmup", report.environment.warmup},
            {"note", report.environment.note}}}};
}

// --- codec-check ----------------------------------------------------------

struct CodecCheckConfig {
  std::string image;
  CodecSpec codec;
  std::string overlay;    // optional PNG with large errors tinted purple
  std::string error_map;  // optional PNG of the per-pixel error
  double threshold = 0.05;
};

/// Tints pixels whose mean channel error exceeds `threshold` toward purple,
/// in proportion to the error.
inline ImageBuffer error_overlay(const ImageBuffer& image, const ImageBuffer& error_map, double threshold) {
  ImageBuffer out = image;
  const float purple[3] = {0.6f, 0.0f, 0.8f};
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double e = 0.0;
      for (int c = 0; c < error_map.channels(); ++c) e += error_map.at(y, x, c);
      e /= error_map.channels();
      if (e <= threshold) continue;
      const float a = static_cast<float>(std::min(1.0, 0.5 + e / (2.0 * threshold) * 0.5));
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = (1.0f - a) * image.at(y, x, c) + a * purple[c];
    }
  return out;
}

inline json cmd_codec_check(const CodecCheckConfig& cfg) {
  require_file(cfg.image, "image");
  const auto codec = make_codec(cfg.codec);
  const ImageBuffer img = io::read_image(cfg.image);
  const int f = codec->descriptor().spatial_factor;
  const int H = (img.height() + f - 1) / f * f, W = (img.width() + f - 1) / f * f;
  const ImageBuffer padded = (H == img.height() && W == img.width()) ? img : img.pad_reflect(H, W);
  ReconstructionDiagnostic d = roundtrip_diagnostic(*codec, padded);
  if (H != img.height() || W != img.width()) {
    d.error_map = d.error_map.crop(0, 0, img.height(), img.width());
    double sum = 0.0, mx = 0.0;
    for (float v : d.error_map.values()) sum += v, mx = std::max(mx, static_cast<double>(v));
    d.mean_abs_error = sum / static_cast<double>(d.error_map.size());
    d.max_abs_error = mx;
  }
  if (!cfg.overlay.empty()) io::write_png(cfg.overlay, error_overlay(img, d.error_map, cfg.threshold));
  if (!cfg.error_map.empty()) io::write_png(cfg.error_map, d.error_map);
  std::size_t flagged = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double e = 0.0;
      for (int c = 0; c < 3; ++c) e += d.error_map.at(y, x, c);
      if (e / 3.0 > cfg.threshold) ++flagged;
    }
  return {{"command", "codec-check"},
          {"codec", cfg.codec.to_json()},
          {"mean_abs_error", d.mean_abs_error},
          {"max_abs_error", d.max_abs_error},
          {"pixels_over_threshold", flagged},
          {"threshold", cfg.threshold}};
}

}  // namespace latfuse::cli
