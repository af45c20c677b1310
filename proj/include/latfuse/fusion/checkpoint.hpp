#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/fusion/train.hpp"
#include "latfuse/fusion/unet.hpp"
#include "latfuse/nn/weights_file.hpp"

namespace latfuse {

namespace detail {

/// Throws ValueError naming the first key of `j` not in `allowed`.
inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ValueError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ValueError("unknown key '" + key + "' in " + what);
}

template <class V>
void read_opt(const nlohmann::json& j, const char* key, V& dst, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ValueError("bad value for '" + std::string(key) + "' in " + what + ": " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const FusionNetConfig& c) {
  return {{"input_slots", c.input_slots},   {"latent_channels", c.latent_channels},
          {"base_width", c.base_width},     {"channel_mult", c.channel_mult},
          {"norm_groups", c.norm_groups},   {"mid_attention", c.mid_attention},
          {"residual_mean", c.residual_mean}, {"init_seed", c.init_seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline FusionNetConfig fusion_config_from_json(const nlohmann::json& j, FusionNetConfig c = {}) {
  const std::string what = "network config";
  detail::reject_unknown_keys(j,
                              {"input_slots", "latent_channels", "base_width", "channel_mult", "norm_groups",
                               "mid_attention", "residual_mean", "init_seed"},
                              what);
  detail::read_opt(j, "input_slots", c.input_slots, what);
  detail::read_opt(j, "latent_channels", c.latent_channels, what);
  detail::read_opt(j, "base_width", c.base_width, what);
  detail::read_opt(j, "channel_mult", c.channel_mult, what);
  detail::read_opt(j, "norm_groups", c.norm_groups, what);
  detail::read_opt(j, "mid_attention", c.mid_attention, what);
  detail::read_opt(j, "residual_mean", c.residual_mean, what);
  detail::read_opt(j, "init_seed", c.init_seed, what);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"patch_size", c.patch_size},
          {"global_batch", c.global_batch},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"ema_decay", c.ema_decay},
          {"pixel_loss_weight", c.pixel_loss_weight},
          {"permute_slots", c.permute_slots},
          {"seed", c.seed},
          {"log_every", c.log_every}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  const std::string what = "train config";
  detail::reject_unknown_keys(j,
                              {"patch_size", "global_batch", "steps", "learning_rate", "ema_decay",
                               "pixel_loss_weight", "permute_slots", "seed", "log_every"},
                              what);
  detail::read_opt(j, "patch_size", c.patch_size, what);
  detail::read_opt(j, "global_batch", c.global_batch, what);
  detail::read_opt(j, "steps", c.steps, what);
  detail::read_opt(j, "learning_rate", c.learning_rate, what);
  detail::read_opt(j, "ema_decay", c.ema_decay, what);
  detail::read_opt(j, "pixel_loss_weight", c.pixel_loss_weight, what);
  detail::read_opt(j, "permute_slots", c.permute_slots, what);
  detail::read_opt(j, "seed", c.seed, what);
  detail::read_opt(j, "log_every", c.log_every, what);
  return c;
}

inline constexpr std::array<char, 8> kCheckpointMagic = {'L', 'F', 'C', 'K', '0', '0', '0', '1'};

/// Checkpoint layout:
///
///     "LFCK0001"
///     uint32 header length, header JSON (network, train config, step, codec, rng)
///     named-tensor block (params.*, ema.*), float32
///     uint64 count, float64 Adam first moments
///     uint64 count, float64 Adam second moments
///
/// Everything needed to resume bit-for-bit is stored.
inline void save_checkpoint(const std::filesystem::path& path, const TrainState<float>& state,
                            const std::string& codec_name) {
  const nlohmann::json header = {{"network", to_json(state.net.config())},
                                 {"train", to_json(state.config)},
                                 {"step", state.step},
                                 {"optimizer_steps", state.optimizer.steps()},
                                 {"codec", codec_name},
                                 {"rng", state.rng.state()}};
  nn::TensorMap tensors = nn::export_store(state.net.params(), std::span<const float>(state.net.params().values()),
                                           "params.");
  nn::TensorMap ema = nn::export_store(state.net.params(), std::span<const float>(state.ema_params), "ema.");
  tensors.merge(ema);

  AtomicFile file(path);
  {
    std::ofstream os(file.temp_path(), std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    const std::string h = header.dump();
    nn::write_u32(os, static_cast<std::uint32_t>(h.size()));
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    nn::write_tensors(os, tensors);
    for (const auto* moments : {&state.optimizer.first_moment(), &state.optimizer.second_moment()}) {
      const std::uint64_t n = moments->size();
      os.write(reinterpret_cast<const char*>(&n), sizeof n);
      os.write(reinterpret_cast<const char*>(moments->data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!os) throw IoError("short write to " + path.string());
  }
  file.commit();
}

struct Checkpoint {
  TrainState<float> state;
  std::string codec_name;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCheckpointMagic) throw IoError(path.string() + " is not a checkpoint");
  const std::uint32_t hlen = nn::read_u32(is);
  std::string h(hlen, '\0');
  is.read(h.data(), hlen);
  if (!is) throw IoError("truncated checkpoint header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  Checkpoint ck{TrainState<float>(fusion_config_from_json(header.at("network")),
                                  train_config_from_json(header.at("train"))),
                header.value("codec", std::string{})};
  TrainState<float>& st = ck.state;
  st.step = header.at("step").get<long long>();
  st.optimizer.set_steps(header.at("optimizer_steps").get<long long>());
  st.rng.set_state(header.at("rng").get<std::string>());

  const nn::TensorMap tensors = nn::read_tensors(is);
  nn::assign_from(st.net.params(), tensors, "params.");
  nn::ParamStore<float> ema_store = st.net.params();
  nn::assign_from(ema_store, tensors, "ema.");
  st.ema_params.assign(ema_store.values().begin(), ema_store.values().end());
  for (auto* moments : {&st.optimizer.first_moment(), &st.optimizer.second_moment()}) {
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n != moments->size()) throw IoError("checkpoint optimizer state does not match the network");
    is.read(reinterpret_cast<char*>(moments->data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint optimizer state in " + path.string());
  }
  return ck;
}

}  // namespace latfuse
