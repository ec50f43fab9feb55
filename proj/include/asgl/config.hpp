#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "asgl/model.hpp"
#include "asgl/trainer.hpp"

namespace asgl {

// Every tunable of a run, merged from built-in defaults, a key=value config
// file, and command-line overrides, in that order. The resolved state is
// written next to a run's outputs so the run can be reproduced from the
// file alone.
struct RunConfig {
  std::string mode = "f64";  // f32 | f64
  std::uint64_t seed = 0;

  // training recipe
  std::size_t epochs = 120;
  std::size_t batch_p = 8;
  std::size_t batch_k = 4;
  double lr = 5e-3;
  std::size_t lr_step_epochs = 40;
  double lr_decay = 0.1;
  double lambda1 = 0.7;
  double lambda2 = 0.3;
  double margin = 0.3;
  std::size_t max_iterations = 0;

  // clip sampling
  std::size_t clip_len = 8;
  std::size_t stride = 2;

  // model shape
  std::vector<std::size_t> refine_dims{128, 512, 2048};
  std::vector<std::size_t> gat_dims{256, 256};
  std::vector<std::size_t> sta_channels{128, 256};
  std::size_t heads = 4;
  std::size_t partition_hops = 3;
  std::size_t fused_dim = 256;
  std::size_t appearance_dim = 64;
  double score_slope = 0.2;
  double activation_slope = 0.01;
  bool circular_time = false;
  bool use_appearance = true;
  bool use_shape = true;
  bool use_gait = true;

  // evaluation and embedding
  std::string protocol = "cc";  // cc | standard | sc | all
  std::string embed_split = "all";  // train | query | gallery | all

  // synthetic data generation
  std::size_t synth_identities = 8;
  std::size_t synth_tracklets = 4;
  std::size_t synth_frames = 32;
  std::size_t synth_clothing = 2;
  std::size_t synth_appearance_dim = 8;
  double synth_appearance_noise = 0.05;
};

// The documented key set, in dump order.
std::vector<std::string> config_keys();

// Sets one key. Unknown keys and malformed values raise config errors.
void apply_config_value(RunConfig& config, const std::string& key,
                        const std::string& value);

// Reads "key = value" lines; '#' starts a comment, blank lines are skipped.
// Errors name the offending line.
void apply_config_file(RunConfig& config, const std::string& path);

// One "key = value" line per documented key; parsing the text back yields
// an identical config.
std::string resolved_config_text(const RunConfig& config);
void write_resolved_config(const RunConfig& config, const std::string& path);

template <typename T>
ModelConfig<T> to_model_config(const RunConfig& c) {
  ModelConfig<T> m;
  m.clip_len = c.clip_len;
  m.refine_dims = c.refine_dims;
  m.gat_dims = c.gat_dims;
  m.sta_channels = c.sta_channels;
  m.heads = c.heads;
  m.partition_hops = static_cast<int>(c.partition_hops);
  m.fused_dim = c.fused_dim;
  m.appearance_dim = c.appearance_dim;
  m.score_slope = static_cast<T>(c.score_slope);
  m.activation_slope = static_cast<T>(c.activation_slope);
  m.circular_time = c.circular_time;
  m.use_appearance = c.use_appearance;
  m.use_shape = c.use_shape;
  m.use_gait = c.use_gait;
  return m;
}

template <typename T>
TrainConfig<T> to_train_config(const RunConfig& c) {
  TrainConfig<T> t;
  t.epochs = c.epochs;
  t.batch_p = c.batch_p;
  t.batch_k = c.batch_k;
  t.lr0 = static_cast<T>(c.lr);
  t.lr_step_epochs = c.lr_step_epochs;
  t.lr_decay = static_cast<T>(c.lr_decay);
  t.clip_len = c.clip_len;
  t.stride = c.stride;
  t.loss.lambda1 = static_cast<T>(c.lambda1);
  t.loss.lambda2 = static_cast<T>(c.lambda2);
  t.loss.margin = static_cast<T>(c.margin);
  t.seed = c.seed;
  t.max_iterations = c.max_iterations;
  return t;
}

}  // namespace asgl
