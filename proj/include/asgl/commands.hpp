#pragma once

#include <iosfwd>
#include <string>

#include "asgl/config.hpp"

namespace asgl {

// Each command reads its inputs, writes its outputs into an output
// directory, and drops the fully resolved configuration next to them as
// resolved.cfg. Failures surface as Error; nothing is printed to the log
// stream that a batch caller could mistake for data.

struct PreprocessArgs {
  std::string keypoints_path;
  std::string manifest_path;
  std::string appearance_path;  // optional
  std::string out_dir;
};

struct TrainArgs {
  std::string keypoints_path;  // keypoints JSONL or a processed clip store
  std::string manifest_path;
  std::string appearance_path;  // optional
  std::string out_dir;
};

struct EmbedArgs {
  std::string checkpoint_path;
  std::string keypoints_path;
  std::string manifest_path;
  std::string appearance_path;  // optional
  std::string out_dir;
};

struct EvalArgs {
  std::string checkpoint_path;
  std::string keypoints_path;
  std::string manifest_path;
  std::string appearance_path;  // optional
  std::string out_dir;
};

struct SynthArgs {
  std::string out_dir;
};

// Normalizes raw keypoint tracklets into a clip store plus a human-readable
// index. Re-running on the same inputs writes byte-identical files.
void cmd_preprocess(const PreprocessArgs& args, const RunConfig& config,
                    std::ostream& log);

// Trains a model and writes model.ckpt plus loss.log. The numeric mode
// follows config.mode.
void cmd_train(const TrainArgs& args, const RunConfig& config,
               std::ostream& log);

// Writes one embedding per tracklet of the configured split as JSONL. The
// numeric mode follows the checkpoint, not the config.
void cmd_embed(const EmbedArgs& args, const RunConfig& config,
               std::ostream& log);

// Retrieval metrics for the configured protocol (or all three) as
// report.json, with the full match-rate curves in cmc.csv.
void cmd_eval(const EvalArgs& args, const RunConfig& config,
              std::ostream& log);

// Generates a synthetic gait dataset in the raw keypoint format.
void cmd_synth(const SynthArgs& args, const RunConfig& config,
               std::ostream& log);

// Gradient and invariant self-test; raises a numeric error if any check
// fails, so the exit code reflects the verdict.
void cmd_check(const RunConfig& config, std::ostream& log);

}  // namespace asgl
