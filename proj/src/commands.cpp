#include "asgl/commands.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "asgl/checkpoint.hpp"
#include "asgl/error.hpp"
#include "asgl/eval.hpp"
#include "asgl/grad_check.hpp"
#include "asgl/model.hpp"
#include "asgl/pose_io.hpp"
#include "asgl/synth.hpp"
#include "asgl/trainer.hpp"

namespace asgl {

namespace {

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) {
    raise(ErrorCode::config, "no output directory given");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    raise(ErrorCode::file,
          "cannot create output directory " + dir + ": " + ec.message());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) {
    raise(ErrorCode::file, "cannot write " + path);
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Model dimensions that only the trained artifact knows: the classifier
// width fixes the class count, and a missing built-in appearance encoder
// means the model was trained on precomputed appearance vectors whose width
// the fusion projection remembers.
struct CheckpointGeometry {
  std::size_t num_classes = 0;
  std::size_t sidecar_dim = 0;  // 0 selects the built-in encoder
};

CheckpointGeometry checkpoint_geometry(const CheckpointFile& ckpt) {
  const TensorRecord* head = nullptr;
  const TensorRecord* proj_a = nullptr;
  bool builtin = false;
  for (const auto& record : ckpt.tensors) {
    if (record.name == "classifier.weight") head = &record;
    if (record.name == "fusion.proj_a.weight") proj_a = &record;
    if (record.name.rfind("appearance.", 0) == 0) builtin = true;
  }
  if (head == nullptr || head->shape.size() != 2) {
    raise(ErrorCode::data, "checkpoint carries no classifier head");
  }
  CheckpointGeometry geo;
  geo.num_classes = head->shape[1];
  if (!builtin) {
    if (proj_a == nullptr || proj_a->shape.size() != 2) {
      raise(ErrorCode::data, "checkpoint carries no appearance projection");
    }
    geo.sidecar_dim = proj_a->shape[0];
  }
  return geo;
}

template <typename T>
AsglModel<T> restore_model(const CheckpointFile& ckpt, const RunConfig& config,
                           const ClipDataset& data) {
  const CheckpointGeometry geo = checkpoint_geometry(ckpt);
  if (geo.sidecar_dim > 0 && data.appearance_dim != geo.sidecar_dim) {
    raise(ErrorCode::config,
          "the checkpoint expects " + std::to_string(geo.sidecar_dim) +
              "-dimensional appearance vectors but the dataset carries " +
              std::to_string(data.appearance_dim));
  }
  Rng rng(config.seed);
  AsglModel<T> model(to_model_config<T>(config), geo.num_classes,
                     geo.sidecar_dim, rng);
  auto params = model.params();
  apply_checkpoint(ckpt, params);
  return model;
}

std::vector<std::size_t> split_selection(const ClipDataset& data,
                                         const std::string& split) {
  if (split == "all") {
    std::vector<std::size_t> indices(data.tracklets.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    return indices;
  }
  return data.split_indices(parse_split(split));
}

template <typename T>
void run_train(const TrainArgs& args, const RunConfig& config,
               std::ostream& log) {
  const ClipDataset data = load_dataset(
      args.keypoints_path, args.manifest_path, args.appearance_path);
  const std::size_t classes = data.train_person_ids().size();

  Rng rng(config.seed);
  AsglModel<T> model(to_model_config<T>(config), classes, data.appearance_dim,
                     rng);
  Trainer<T> trainer(model, data, to_train_config<T>(config));

  std::ostringstream lines;
  const TrainResult result = trainer.run(&lines);
  log << lines.str();
  write_text(out_path(args.out_dir, "loss.log"), lines.str());

  const auto params = model.params();
  const CheckpointFile ckpt = pack_checkpoint(
      params, &trainer.optimizer(), trainer.epochs_done(),
      trainer.rng().state());
  save_checkpoint_file(out_path(args.out_dir, "model.ckpt"), ckpt);

  log << "trained " << trainer.epochs_done() << " epochs, " << result.steps
      << " steps, " << classes << " identities";
  if (!result.epoch_loss.empty()) {
    log << ", final epoch loss " << result.epoch_loss.back();
  }
  log << "\n";
}

template <typename T>
void run_embed(const EmbedArgs& args, const RunConfig& config,
               const CheckpointFile& ckpt, std::ostream& log) {
  const ClipDataset data = load_dataset(
      args.keypoints_path, args.manifest_path, args.appearance_path);
  const AsglModel<T> model = restore_model<T>(ckpt, config, data);

  const std::vector<std::size_t> indices =
      split_selection(data, config.embed_split);
  const auto embeddings =
      embed_tracklets(model, data, indices, config.stride);

  std::ostringstream out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const ProcessedTracklet& t = data.tracklets[indices[i]];
    const nlohmann::json line = {{"tracklet_id", t.tracklet_id},
                                 {"person_id", t.person_id},
                                 {"clothing_id", t.clothing_id},
                                 {"camera_id", t.camera_id},
                                 {"embedding", embeddings[i]}};
    out << line.dump() << "\n";
  }
  write_text(out_path(args.out_dir, "embeddings.jsonl"), out.str());
  log << "embedded " << indices.size() << " tracklets from split "
      << config.embed_split << "\n";
}

template <typename T>
void run_eval(const EvalArgs& args, const RunConfig& config,
              const CheckpointFile& ckpt, std::ostream& log) {
  const ClipDataset data = load_dataset(
      args.keypoints_path, args.manifest_path, args.appearance_path);
  const AsglModel<T> model = restore_model<T>(ckpt, config, data);

  const auto query_idx = data.split_indices(Split::query);
  const auto gallery_idx = data.split_indices(Split::gallery);
  if (query_idx.empty()) {
    raise(ErrorCode::eval, "the manifest has no query tracklets");
  }
  if (gallery_idx.empty()) {
    raise(ErrorCode::eval, "the manifest has no gallery tracklets");
  }

  const auto query_emb =
      embed_tracklets(model, data, query_idx, config.stride);
  const auto gallery_emb =
      embed_tracklets(model, data, gallery_idx, config.stride);
  std::vector<TrackletMeta> query_meta, gallery_meta;
  for (std::size_t idx : query_idx) {
    query_meta.push_back(meta_of(data.tracklets[idx]));
  }
  for (std::size_t idx : gallery_idx) {
    gallery_meta.push_back(meta_of(data.tracklets[idx]));
  }

  std::vector<Protocol> protocols;
  if (config.protocol == "all") {
    protocols = {Protocol::cc, Protocol::standard, Protocol::sc};
  } else {
    protocols = {parse_protocol(config.protocol)};
  }

  nlohmann::json reports = nlohmann::json::array();
  std::string csv = "protocol,rank,match_rate\n";
  for (Protocol protocol : protocols) {
    const ProtocolReport report = evaluate_retrieval(
        query_emb, query_meta, gallery_emb, gallery_meta, protocol);
    reports.push_back({{"protocol", protocol_name(protocol)},
                       {"rank1", report.rank1},
                       {"rank5", report.rank5},
                       {"rank10", report.rank10},
                       {"mAP", report.mean_ap},
                       {"num_queries", report.num_queries},
                       {"dropped_queries", report.dropped}});
    for (std::size_t r = 0; r < report.cmc.size(); ++r) {
      csv += protocol_name(protocol);
      csv += ",";
      csv += std::to_string(r + 1);
      csv += ",";
      csv += format_double(report.cmc[r]);
      csv += "\n";
    }
    log << protocol_name(protocol) << ": rank-1 " << report.rank1
        << " rank-5 " << report.rank5 << " rank-10 " << report.rank10
        << " mAP " << report.mean_ap << " (" << report.num_queries
        << " queries, " << report.dropped << " dropped)\n";
  }

  const nlohmann::json document = {{"reports", reports}};
  write_text(out_path(args.out_dir, "report.json"), document.dump(2) + "\n");
  write_text(out_path(args.out_dir, "cmc.csv"), csv);
}

struct CheckOutcome {
  std::string name;
  bool ok = false;
  std::string detail;
};

Tensor<double> permute_frames(const Tensor<double>& clip,
                              const std::vector<std::size_t>& order) {
  const std::size_t frames = clip.dim(0);
  const std::size_t row = clip.dim(1) * clip.dim(2);
  std::vector<double> values(clip.data().size());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < row; ++i) {
      values[t * row + i] = clip.data()[order[t] * row + i];
    }
  }
  return Tensor<double>::from_data({frames, clip.dim(1), clip.dim(2)},
                                   values);
}

CheckOutcome check_fusion_loss_gradients() {
  Rng rng(101);
  AdaptiveFusion<double> fusion(3, 4, 5, 6, rng);
  Linear<double> head(6, 3, rng);
  const std::size_t batch = 4;
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  std::vector<Tensor<double>> fa, fs, fg;
  for (std::size_t i = 0; i < batch; ++i) {
    fa.push_back(Tensor<double>::uniform({3}, -1, 1, rng));
    fs.push_back(Tensor<double>::uniform({4}, -1, 1, rng));
    fg.push_back(Tensor<double>::uniform({5}, -1, 1, rng));
  }
  ParamList<double> params;
  fusion.collect("fusion", params);
  head.collect("classifier", params);
  std::vector<Tensor<double>> inputs;
  for (auto& p : params) inputs.push_back(p.tensor);
  for (std::size_t i = 0; i < batch; ++i) {
    inputs.push_back(fa[i]);
    inputs.push_back(fs[i]);
    inputs.push_back(fg[i]);
  }
  LossConfig<double> loss_cfg;
  auto fn = [&](const std::vector<Tensor<double>>&) {
    std::vector<Tensor<double>> rows;
    for (std::size_t i = 0; i < batch; ++i) {
      auto fe = fusion.forward(fa[i], fs[i], fg[i]);
      rows.push_back(reshape(fe.f, {std::size_t(1), fe.f.dim(0)}));
    }
    auto emb = concat(rows, 0);
    auto ce = cross_entropy_loss(head.forward(emb), labels);
    auto tri = batch_hard_triplet(emb, labels, 0.3).loss;
    return total_loss(ce, tri, loss_cfg);
  };
  const double worst = grad_check(fn, inputs);
  return {"fusion and loss gradients match finite differences",
          worst < 1e-4, "worst relative error " + format_double(worst)};
}

CheckOutcome check_model_gradients() {
  ModelConfig<double> cfg;
  cfg.clip_len = 3;
  cfg.refine_dims = {3, 4};
  cfg.gat_dims = {4};
  cfg.sta_channels = {4};
  cfg.heads = 2;
  cfg.partition_hops = 2;
  cfg.fused_dim = 4;
  cfg.appearance_dim = 4;
  Rng rng(102);
  AsglModel<double> model(cfg, 2, 0, rng);

  std::vector<Tensor<double>> clips;
  for (int i = 0; i < 4; ++i) {
    clips.push_back(
        Tensor<double>::uniform({cfg.clip_len, kBodyJoints, 3}, -0.5, 0.5,
                                rng));
  }
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  auto params = model.params();
  std::vector<Tensor<double>> inputs;
  for (auto& p : params) inputs.push_back(p.tensor);

  LossConfig<double> loss_cfg;
  auto fn = [&](const std::vector<Tensor<double>>&) {
    auto out = model.forward_batch(clips, {});
    auto ce = cross_entropy_loss(out.logits, labels);
    auto tri = batch_hard_triplet(out.embeddings, labels, loss_cfg.margin);
    return total_loss(ce, tri.loss, loss_cfg);
  };
  const double worst = grad_check(fn, inputs);
  return {"full-model gradients match finite differences", worst < 1e-4,
          "worst relative error " + format_double(worst) + " over " +
              std::to_string(inputs.size()) + " tensors"};
}

CheckOutcome check_shape_frame_invariance() {
  ShapeBranchConfig<double> cfg;
  cfg.refine_dims = {3, 4};
  cfg.gat_dims = {4};
  Rng rng(103);
  ShapeBranch<double> branch(cfg, rng);
  const SkeletonGraph graph = default_body_graph();
  const auto clip = Tensor<double>::uniform({5, kBodyJoints, 3}, -1, 1, rng);
  std::vector<std::size_t> order{4, 2, 0, 3, 1};
  const auto direct = branch.forward(clip, graph);
  const auto shuffled = branch.forward(permute_frames(clip, order), graph);
  const bool same = direct.data() == shuffled.data();
  return {"shape embedding ignores frame order", same,
          same ? "bitwise equal under a frame permutation"
               : "outputs diverged under a frame permutation"};
}

CheckOutcome check_gait_shift_invariance() {
  GaitBranchConfig<double> cfg;
  cfg.channels = {4};
  cfg.heads = 2;
  cfg.partition_hops = 2;
  cfg.circular_time = true;
  Rng rng(104);
  const std::size_t clip_len = 4;
  GaitBranch<double> branch(cfg, default_body_graph(), clip_len, rng);
  const auto clip =
      Tensor<double>::uniform({clip_len, kBodyJoints, 3}, -1, 1, rng);
  std::vector<std::size_t> order(clip_len);
  for (std::size_t t = 0; t < clip_len; ++t) order[t] = (t + 1) % clip_len;
  const auto direct = branch.forward(clip);
  const auto shifted = branch.forward(permute_frames(clip, order));
  const bool same = direct.data() == shifted.data();
  return {"gait embedding ignores circular time shifts", same,
          same ? "bitwise equal under a one-frame rotation"
               : "outputs diverged under a one-frame rotation"};
}

CheckOutcome check_fusion_convexity() {
  Rng rng(105);
  AdaptiveFusion<double> fusion(3, 4, 5, 6, rng);
  double worst = 0.0;
  bool nonnegative = true;
  for (int round = 0; round < 20; ++round) {
    auto fa = Tensor<double>::uniform({3}, -2, 2, rng);
    auto fs = Tensor<double>::uniform({4}, -2, 2, rng);
    auto fg = Tensor<double>::uniform({5}, -2, 2, rng);
    const auto fe = fusion.forward(fa, fs, fg);
    double sum = 0.0;
    for (double w : fe.weights.data()) {
      sum += w;
      if (w < 0.0) nonnegative = false;
    }
    worst = std::max(worst, std::fabs(sum - 1.0));
  }
  return {"fusion weights form a convex combination",
          nonnegative && worst <= 1e-12,
          "largest deviation of the weight sum from 1 is " +
              format_double(worst)};
}

CheckOutcome check_seed_determinism(std::uint64_t seed) {
  const auto cfg = ModelConfig<double>::tiny();
  Rng rng_a(seed), rng_b(seed), rng_clip(106);
  AsglModel<double> a(cfg, 3, 0, rng_a);
  AsglModel<double> b(cfg, 3, 0, rng_b);
  const auto clip =
      Tensor<double>::uniform({cfg.clip_len, kBodyJoints, 3}, -1, 1,
                              rng_clip);
  NoGradGuard guard;
  const auto ea = a.embed(clip);
  const auto eb = b.embed(clip);
  const bool same = ea.f.data() == eb.f.data();
  return {"one seed builds one model", same,
          same ? "two builds from one seed embed bitwise identically"
               : "two builds from one seed disagree"};
}

}  // namespace

void cmd_preprocess(const PreprocessArgs& args, const RunConfig& config,
                    std::ostream& log) {
  ensure_out_dir(args.out_dir);
  write_resolved_config(config, out_path(args.out_dir, "resolved.cfg"));

  const ClipDataset data = load_dataset(
      args.keypoints_path, args.manifest_path, args.appearance_path);
  write_clip_store(out_path(args.out_dir, "clips.bin"), data.tracklets);

  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < data.tracklets.size(); ++i) {
    const ProcessedTracklet& t = data.tracklets[i];
    index.push_back({{"tracklet_id", t.tracklet_id},
                     {"person_id", t.person_id},
                     {"clothing_id", t.clothing_id},
                     {"camera_id", t.camera_id},
                     {"frames", t.frames},
                     {"split", split_name(data.splits[i])}});
  }
  write_text(out_path(args.out_dir, "index.json"), index.dump(2) + "\n");

  if (data.tracklets.empty()) {
    log << "warning: no manifest entries matched; the clip store is empty\n";
  }
  log << "preprocessed " << data.tracklets.size() << " tracklets ("
      << data.skipped_records << " keypoint records skipped)\n";
}

void cmd_train(const TrainArgs& args, const RunConfig& config,
               std::ostream& log) {
  ensure_out_dir(args.out_dir);
  write_resolved_config(config, out_path(args.out_dir, "resolved.cfg"));
  if (config.mode == "f32") {
    run_train<float>(args, config, log);
  } else {
    run_train<double>(args, config, log);
  }
}

void cmd_embed(const EmbedArgs& args, const RunConfig& config,
               std::ostream& log) {
  ensure_out_dir(args.out_dir);
  const CheckpointFile ckpt = load_checkpoint_file(args.checkpoint_path);
  RunConfig effective = config;
  effective.mode = ckpt.dtype;
  if (effective.mode != config.mode) {
    log << "note: the checkpoint stores " << ckpt.dtype
        << " weights; mode " << config.mode << " is overridden\n";
  }
  write_resolved_config(effective, out_path(args.out_dir, "resolved.cfg"));
  if (effective.mode == "f32") {
    run_embed<float>(args, effective, ckpt, log);
  } else {
    run_embed<double>(args, effective, ckpt, log);
  }
}

void cmd_eval(const EvalArgs& args, const RunConfig& config,
              std::ostream& log) {
  ensure_out_dir(args.out_dir);
  const CheckpointFile ckpt = load_checkpoint_file(args.checkpoint_path);
  RunConfig effective = config;
  effective.mode = ckpt.dtype;
  if (effective.mode != config.mode) {
    log << "note: the checkpoint stores " << ckpt.dtype
        << " weights; mode " << config.mode << " is overridden\n";
  }
  write_resolved_config(effective, out_path(args.out_dir, "resolved.cfg"));
  if (effective.mode == "f32") {
    run_eval<float>(args, effective, ckpt, log);
  } else {
    run_eval<double>(args, effective, ckpt, log);
  }
}

void cmd_synth(const SynthArgs& args, const RunConfig& config,
               std::ostream& log) {
  ensure_out_dir(args.out_dir);
  write_resolved_config(config, out_path(args.out_dir, "resolved.cfg"));

  SynthSpec spec;
  spec.identities = default_identities(config.synth_identities);
  spec.tracklets_per_identity = config.synth_tracklets;
  spec.frames_per_tracklet = config.synth_frames;
  spec.clothing_variants = config.synth_clothing;
  spec.appearance_dim = config.synth_appearance_dim;
  spec.appearance_noise = config.synth_appearance_noise;
  spec.seed = config.seed;
  const SynthOutput out = synthesize_gait(spec);

  write_keypoints_jsonl(out_path(args.out_dir, "keypoints.jsonl"),
                        out.sequences);
  write_manifest_jsonl(out_path(args.out_dir, "manifest.jsonl"),
                       out.manifest);
  if (spec.appearance_dim > 0) {
    write_appearance_jsonl(out_path(args.out_dir, "appearance.jsonl"),
                           out.appearance);
  }
  log << "generated " << spec.identities.size() << " identities x "
      << spec.tracklets_per_identity << " tracklets x "
      << spec.frames_per_tracklet << " frames\n";
}

void cmd_check(const RunConfig& config, std::ostream& log) {
  std::vector<CheckOutcome> outcomes;
  const auto run = [&](CheckOutcome (*check)()) {
    try {
      outcomes.push_back(check());
    } catch (const Error& e) {
      outcomes.push_back({"check aborted", false, e.what()});
    }
  };
  run(&check_fusion_loss_gradients);
  run(&check_model_gradients);
  run(&check_shape_frame_invariance);
  run(&check_gait_shift_invariance);
  run(&check_fusion_convexity);
  try {
    outcomes.push_back(check_seed_determinism(config.seed));
  } catch (const Error& e) {
    outcomes.push_back({"one seed builds one model", false, e.what()});
  }

  std::size_t failed = 0;
  for (const auto& outcome : outcomes) {
    if (!outcome.ok) ++failed;
    log << (outcome.ok ? "[ok] " : "[fail] ") << outcome.name << ": "
        << outcome.detail << "\n";
  }
  if (failed > 0) {
    raise(ErrorCode::numeric, "cmd_check: " + std::to_string(failed) +
                                  " of " + std::to_string(outcomes.size()) +
                                  " checks failed");
  }
  log << "all " << outcomes.size() << " checks passed\n";
}

}  // namespace asgl
