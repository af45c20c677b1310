// latfuse: generate, train, fuse, eval, bench and codec-check.
//
// Every subcommand accepts --config FILE (TOML; keys are the long flag names,
// grouped under [generate], [train], ...). Flags override the file. Unknown
// keys are rejected. The effective configuration, defaults included, is
// printed to stderr before the command runs, and a JSON run summary is
// printed to stdout (and written to --summary when given).
//
// Exit codes: 0 ok, 1 internal error, 2 configuration, 3 missing/unreadable
// input, 4 asset catalog, 5 shape mismatch, 6 training divergence.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "latfuse/cli/commands.hpp"

namespace {

using namespace latfuse;
using namespace latfuse::cli;

void add_codec_flags(CLI::App* app, CodecSpec& c) {
  app->add_option("--codec", c.name, "identity | space_to_depth | taesd")->capture_default_str();
  app->add_option("--codec-factor", c.factor, "space_to_depth block size")->capture_default_str();
  app->add_option("--codec-weights", c.weights, "taesd weights (named-tensor file)");
  app->add_option("--codec-channels", c.latent_channels, "taesd latent channels")->capture_default_str();
}

void add_network_flags(CLI::App* app, FusionNetConfig& n) {
  app->add_option("--base-width", n.base_width)->capture_default_str();
  app->add_option("--norm-groups", n.norm_groups)->capture_default_str();
  app->add_flag("--mid-attention,!--no-mid-attention", n.mid_attention)->capture_default_str();
  app->add_flag("--residual-mean,!--no-residual-mean", n.residual_mean)->capture_default_str();
  app->add_option("--init-seed", n.init_seed)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space multi-focus image fusion"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "TOML config file; flags override it");
  std::string summary_path;
  app.add_option("--summary", summary_path, "also write the JSON run summary here");

  GenerateConfig gen;
  auto* g = app.add_subcommand("generate", "render a synthetic focus-stack dataset");
  g->add_option("--count", gen.count)->capture_default_str();
  g->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  g->add_option("--out", gen.out)->required();
  g->add_option("--profile", gen.profile, "train | eval (eval forbids subject reuse)")->capture_default_str();
  g->add_option("--assets", gen.assets, "asset catalog directory (default: procedural)");
  g->add_option("--procedural-seed", gen.procedural_seed)->capture_default_str();
  g->add_option("--procedural-subjects", gen.procedural_subjects)->capture_default_str();
  g->add_option("--resolution", gen.resolution)->capture_default_str();
  g->add_option("--subjects-per-scene", gen.subjects_per_scene)->capture_default_str();
  g->add_option("--min-distance", gen.min_distance, "subject plane distance range, metres")->capture_default_str();
  g->add_option("--max-distance", gen.max_distance)->capture_default_str();
  g->add_flag("--blender-scripts", gen.blender_scripts, "also emit <sample_id>.py render scripts")
      ->capture_default_str();

  TrainCmdConfig tr;
  auto* t = app.add_subcommand("train", "train the fusion network");
  t->add_option("--data", tr.data, "training manifest.json")->required();
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--resume", tr.resume, "continue from this checkpoint");
  t->add_option("--log-csv", tr.log_csv, "per-step loss log");
  t->add_option("--checkpoint-every", tr.checkpoint_every)->capture_default_str();
  t->add_option("--patch-size", tr.train.patch_size)->capture_default_str();
  t->add_option("--batch", tr.train.global_batch)->capture_default_str();
  t->add_option("--steps", tr.train.steps)->capture_default_str();
  t->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  t->add_option("--ema-decay", tr.train.ema_decay)->capture_default_str();
  t->add_option("--pixel-loss-weight", tr.train.pixel_loss_weight)->capture_default_str();
  t->add_flag("--permute-slots,!--no-permute-slots", tr.train.permute_slots)->capture_default_str();
  t->add_option("--seed", tr.train.seed)->capture_default_str();
  t->add_option("--log-every", tr.train.log_every)->capture_default_str();
  add_codec_flags(t, tr.codec);
  add_network_flags(t, tr.network);

  FuseConfig fu;
  auto* f = app.add_subcommand("fuse", "fuse 1 to 7 registered images");
  f->add_option("inputs", fu.inputs, "input images (PNG or float container)")->required()->expected(1, 7);
  f->add_option("--checkpoint", fu.checkpoint)->required();
  f->add_option("--out", fu.out)->required();
  f->add_option("--patch-size", fu.patch_size)->capture_default_str();
  f->add_flag("--ema,!--no-ema", fu.use_ema, "use EMA weights")->capture_default_str();
  f->add_option("--debug-dir", fu.debug_dir, "write the weight-sum map and per-patch masks here");
  f->add_option("--codec-weights", fu.codec.weights, "override the codec weights path");

  EvalConfig ev;
  auto* e = app.add_subcommand("eval", "metrics and difficulty report over a test manifest");
  e->add_option("--data", ev.data, "test manifest.json")->required();
  e->add_option("--out", ev.out, "report directory")->required();
  e->add_option("--checkpoint", ev.checkpoint);
  e->add_option("--fused-dir", ev.fused_dir, "evaluate pre-fused <sample_id>.png images instead");
  e->add_option("--method", ev.method)->capture_default_str();
  e->add_option("--patch-size", ev.patch_size)->capture_default_str();
  e->add_option("--difficulty-patch", ev.difficulty_patch)->capture_default_str();
  e->add_option("--thresholds", ev.thresholds)->capture_default_str()->delimiter(',');
  e->add_flag("--ema,!--no-ema", ev.use_ema)->capture_default_str();
  e->add_option("--lpips-cmd", ev.lpips_cmd, "external scorer run as: CMD fused.png gt.png");
  e->add_option("--codec-weights", ev.codec.weights, "override the codec weights path");

  BenchConfig be;
  auto* b = app.add_subcommand("bench", "throughput versus number of inputs");
  b->add_option("--out", be.out, "CSV path")->required();
  b->add_option("--plot", be.plot, "optional PNG chart");
  b->add_option("--checkpoint", be.checkpoint, "default: freshly initialized network");
  b->add_option("--min-inputs", be.min_inputs)->capture_default_str();
  b->add_option("--max-inputs", be.max_inputs)->capture_default_str();
  b->add_option("--trials", be.trials)->capture_default_str();
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--resolution", be.resolution)->capture_default_str();
  b->add_option("--patch-size", be.patch_size)->capture_default_str();
  b->add_flag("--include-noop", be.include_noop)->capture_default_str();
  add_codec_flags(b, be.codec);
  add_network_flags(b, be.network);

  CodecCheckConfig cc;
  auto* c = app.add_subcommand("codec-check", "codec round-trip error for one image");
  c->add_option("image", cc.image)->required();
  c->add_option("--overlay", cc.overlay, "PNG with high-error pixels tinted purple");
  c->add_option("--error-map", cc.error_map, "PNG of |decode(encode(x)) - x|");
  c->add_option("--threshold", cc.threshold)->capture_default_str();
  add_codec_flags(c, cc.codec);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::cerr << "# effective configuration\n" << app.config_to_str(true, false) << "\n";
    nlohmann::json summary;
    if (g->parsed()) summary = cmd_generate(gen);
    else if (t->parsed()) summary = cmd_train(tr);
    else if (f->parsed()) summary = cmd_fuse(fu);
    else if (e->parsed()) summary = cmd_eval(ev);
    else if (b->parsed()) summary = cmd_bench(be);
    else if (c->parsed()) summary = cmd_codec_check(cc);
    summary["status"] = "ok";
    const std::string text = summary.dump(2) + "\n";
    if (!summary_path.empty()) write_text_atomic(summary_path, text);
    std::cout << text;
    return kExitOk;
  } catch (const std::exception& ex) {
    const int rc = exit_code_for(ex);
    std::cerr << "error: " << ex.what() << "\n";
    std::cout << nlohmann::json{{"status", "error"}, {"exit_code", rc}, {"message", ex.what()}}.dump(2) << "\n";
    return rc;
  }
}
