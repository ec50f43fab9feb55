#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "asgl/commands.hpp"
#include "asgl/config.hpp"
#include "asgl/error.hpp"

namespace {

// Flag values are collected as raw strings and funneled through the config
// key registry, so every flag shares the registry's parsing and error
// messages. Precedence: defaults, then --config file, then --set pairs,
// then named flags.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> pairs;
};

void bind_key(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
              const std::string& key, const std::string& desc) {
  cmd->add_option_function<std::string>(
      flag,
      [&opts, key](const std::string& value) {
        opts.pairs.emplace_back(key, value);
      },
      desc);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "key = value configuration file");
  bind_key(cmd, opts, "--seed", "seed", "root seed for all randomness");
  bind_key(cmd, opts, "--epochs", "epochs", "training epochs");
  bind_key(cmd, opts, "--lr", "lr", "initial learning rate");
  bind_key(cmd, opts, "--lambda1", "lambda1",
           "classification loss weight");
  bind_key(cmd, opts, "--lambda2", "lambda2", "metric loss weight");
  bind_key(cmd, opts, "--clip-len", "clip_len", "frames per model clip");
  bind_key(cmd, opts, "--stride", "stride",
           "frame stride when sampling clips");
  bind_key(cmd, opts, "--protocol", "protocol",
           "evaluation protocol: cc, standard, sc, or all");
  bind_key(cmd, opts, "--mode", "mode", "numeric mode: f32 or f64");
  bind_key(cmd, opts, "--heads", "heads", "attention heads per block");
  bind_key(cmd, opts, "--partition-d", "partition_hops",
           "neighborhood partition depth");
  cmd->add_option("--set", opts.sets, "any other config override")
      ->type_name("KEY=VALUE");
}

asgl::RunConfig build_config(const CommonOpts& opts) {
  asgl::RunConfig config;
  if (!opts.config_path.empty()) {
    asgl::apply_config_file(config, opts.config_path);
  }
  for (const std::string& entry : opts.sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      asgl::raise(asgl::ErrorCode::config,
                  "--set needs KEY=VALUE, got \"" + entry + "\"");
    }
    asgl::apply_config_value(config, entry.substr(0, eq),
                             entry.substr(eq + 1));
  }
  for (const auto& [key, value] : opts.pairs) {
    asgl::apply_config_value(config, key, value);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Video person re-identification from 3D skeletons: adaptive fusion of "
      "shape, gait, and appearance embeddings."};
  app.require_subcommand(1);
  CommonOpts opts;

  asgl::PreprocessArgs pre;
  CLI::App* c_pre = app.add_subcommand(
      "preprocess", "normalize raw keypoint tracklets into a clip store");
  c_pre->add_option("--keypoints", pre.keypoints_path,
                    "raw keypoints JSONL or a clip store")
      ->required();
  c_pre->add_option("--manifest", pre.manifest_path, "split manifest JSONL")
      ->required();
  c_pre->add_option("--appearance", pre.appearance_path,
                    "appearance sidecar JSONL");
  c_pre->add_option("--out", pre.out_dir, "output directory")->required();
  add_common(c_pre, opts);

  asgl::TrainArgs train;
  CLI::App* c_train =
      app.add_subcommand("train", "train a model on the train split");
  c_train->add_option("--keypoints", train.keypoints_path,
                      "raw keypoints JSONL or a clip store")
      ->required();
  c_train->add_option("--manifest", train.manifest_path,
                      "split manifest JSONL")
      ->required();
  c_train->add_option("--appearance", train.appearance_path,
                      "appearance sidecar JSONL");
  c_train->add_option("--out", train.out_dir, "output directory")->required();
  add_common(c_train, opts);

  asgl::EmbedArgs embed;
  CLI::App* c_embed = app.add_subcommand(
      "embed", "write one fused embedding per tracklet as JSONL");
  c_embed->add_option("--checkpoint", embed.checkpoint_path,
                      "trained model checkpoint")
      ->required();
  c_embed->add_option("--keypoints", embed.keypoints_path,
                      "raw keypoints JSONL or a clip store")
      ->required();
  c_embed->add_option("--manifest", embed.manifest_path,
                      "split manifest JSONL")
      ->required();
  c_embed->add_option("--appearance", embed.appearance_path,
                      "appearance sidecar JSONL");
  c_embed->add_option("--out", embed.out_dir, "output directory")->required();
  bind_key(c_embed, opts, "--split", "embed_split",
           "tracklets to embed: train, query, gallery, or all");
  add_common(c_embed, opts);

  asgl::EvalArgs eval;
  CLI::App* c_eval = app.add_subcommand(
      "eval", "retrieval metrics for query against gallery");
  c_eval->add_option("--checkpoint", eval.checkpoint_path,
                     "trained model checkpoint")
      ->required();
  c_eval->add_option("--keypoints", eval.keypoints_path,
                     "raw keypoints JSONL or a clip store")
      ->required();
  c_eval->add_option("--manifest", eval.manifest_path,
                     "split manifest JSONL")
      ->required();
  c_eval->add_option("--appearance", eval.appearance_path,
                     "appearance sidecar JSONL");
  c_eval->add_option("--out", eval.out_dir, "output directory")->required();
  add_common(c_eval, opts);

  asgl::SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand(
      "synth", "generate a synthetic gait dataset in the keypoint format");
  c_synth->add_option("--out", synth.out_dir, "output directory")->required();
  bind_key(c_synth, opts, "--identities", "synth_identities",
           "number of synthetic identities");
  bind_key(c_synth, opts, "--tracklets", "synth_tracklets",
           "tracklets per identity");
  bind_key(c_synth, opts, "--frames", "synth_frames",
           "frames per tracklet");
  bind_key(c_synth, opts, "--clothing", "synth_clothing",
           "clothing variants per identity");
  bind_key(c_synth, opts, "--appearance-dim", "synth_appearance_dim",
           "appearance vector width (0 for none)");
  bind_key(c_synth, opts, "--appearance-noise", "synth_appearance_noise",
           "per-tracklet appearance noise");
  add_common(c_synth, opts);

  CLI::App* c_check = app.add_subcommand(
      "check", "run the gradient and invariant self-test");
  add_common(c_check, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const asgl::RunConfig config = build_config(opts);
    if (c_pre->parsed()) {
      asgl::cmd_preprocess(pre, config, std::cout);
    } else if (c_train->parsed()) {
      asgl::cmd_train(train, config, std::cout);
    } else if (c_embed->parsed()) {
      asgl::cmd_embed(embed, config, std::cout);
    } else if (c_eval->parsed()) {
      asgl::cmd_eval(eval, config, std::cout);
    } else if (c_synth->parsed()) {
      asgl::cmd_synth(synth, config, std::cout);
    } else if (c_check->parsed()) {
      asgl::cmd_check(config, std::cout);
    }
  } catch (const asgl::Error& e) {
    std::cerr << asgl::error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unknown-error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
