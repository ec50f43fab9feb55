#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "asgl/fusion.hpp"
#include "asgl/gait_branch.hpp"
#include "asgl/graph.hpp"
#include "asgl/nn.hpp"
#include "asgl/pose.hpp"
#include "asgl/shape_branch.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

template <typename T>
struct ModelConfig {
  std::size_t clip_len = 8;
  std::vector<std::size_t> refine_dims{128, 512, 2048};
  std::vector<std::size_t> gat_dims{256, 256};
  std::vector<std::size_t> sta_channels{128, 256};
  std::size_t heads = 4;
  int partition_hops = 3;
  std::size_t fused_dim = 256;
  // width of the built-in appearance encoder, used when the dataset carries
  // no precomputed appearance vectors
  std::size_t appearance_dim = 64;
  T score_slope = T(0.2);
  T activation_slope = T(0.01);
  bool circular_time = false;
  bool use_appearance = true;
  bool use_shape = true;
  bool use_gait = true;

  // Small enough for finite-difference checks and minute-scale training.
  static ModelConfig tiny() {
    ModelConfig c;
    c.clip_len = 4;
    c.refine_dims = {4, 8, 16};
    c.gat_dims = {8, 8};
    c.sta_channels = {8, 16};
    c.heads = 2;
    c.partition_hops = 2;
    c.fused_dim = 8;
    c.appearance_dim = 8;
    return c;
  }
};

// Sampled clip to model input.
template <typename T>
Tensor<T> clip_tensor(const KeypointClip& clip) {
  std::vector<T> vals(clip.joints.begin(), clip.joints.end());
  return Tensor<T>::from_data({clip.frames, kBodyJoints, std::size_t(3)},
                              std::move(vals));
}

// Full pipeline: per-clip shape and gait embeddings from the keypoint
// tensor, an appearance embedding from precomputed vectors or the built-in
// statistics encoder, adaptive fusion, and an identity classifier.
template <typename T>
class AsglModel {
 public:
  // sidecar_dim > 0 means appearance vectors arrive with the data; 0 builds
  // the statistics encoder instead.
  AsglModel(const ModelConfig<T>& config, std::size_t num_classes,
            std::size_t sidecar_dim, Rng& rng)
      : config_(config), sidecar_dim_(sidecar_dim) {
    ShapeBranchConfig<T> sc;
    sc.refine_dims = config.refine_dims;
    sc.gat_dims = config.gat_dims;
    sc.score_slope = config.score_slope;
    sc.activation_slope = config.activation_slope;
    shape_ = ShapeBranch<T>(sc, rng);

    GaitBranchConfig<T> gc;
    gc.channels = config.sta_channels;
    gc.heads = config.heads;
    gc.partition_hops = config.partition_hops;
    gc.activation_slope = config.activation_slope;
    gc.circular_time = config.circular_time;
    gait_ = GaitBranch<T>(gc, default_body_graph(), config.clip_len, rng);

    if (sidecar_dim_ == 0) {
      appearance_encoder_ =
          Mlp<T>(2 * kBodyJoints * 3,
                 {config.appearance_dim, config.appearance_dim}, rng,
                 config.activation_slope, false);
    }
    fusion_ = AdaptiveFusion<T>(appearance_dim(), shape_.out_dim(),
                                gait_.out_dim(), config.fused_dim, rng);
    classifier_ = Linear<T>(config.fused_dim, num_classes, rng);
  }

  std::size_t appearance_dim() const {
    return sidecar_dim_ > 0 ? sidecar_dim_ : config_.appearance_dim;
  }
  std::size_t fused_dim() const { return config_.fused_dim; }
  std::size_t num_classes() const { return classifier_.out_dim(); }
  const ModelConfig<T>& config() const { return config_; }
  ShapeBranch<T>& shape_branch() { return shape_; }
  GaitBranch<T>& gait_branch() { return gait_; }
  AdaptiveFusion<T>& fusion() { return fusion_; }
  Linear<T>& classifier() { return classifier_; }

  // clip: [clip_len, 14, 3]; appearance: [sidecar_dim] or undefined when the
  // built-in encoder (or a disabled appearance modality) supplies it.
  FusedEmbedding<T> embed(const Tensor<T>& clip,
                          const Tensor<T>& appearance = {}) const {
    if (clip.rank() != 3 || clip.dim(0) != config_.clip_len ||
        clip.dim(1) != kBodyJoints || clip.dim(2) != 3) {
      raise(ErrorCode::dimension,
            "AsglModel: clip " + shape_str(clip.shape()) + " must be [" +
                std::to_string(config_.clip_len) + ", " +
                std::to_string(kBodyJoints) + ", 3]");
    }
    Tensor<T> fa;
    if (!config_.use_appearance) {
      fa = Tensor<T>::zeros({appearance_dim()});
    } else if (appearance.defined()) {
      if (sidecar_dim_ == 0) {
        raise(ErrorCode::data,
              "AsglModel: appearance vector given to a model built without "
              "precomputed appearance inputs");
      }
      fa = appearance;
    } else if (sidecar_dim_ == 0) {
      fa = reshape(appearance_encoder_.forward(statistics_input(clip)),
                   {config_.appearance_dim});
    } else {
      raise(ErrorCode::data,
            "AsglModel: missing appearance vector for a model built on "
            "precomputed appearance inputs");
    }
    auto fs = config_.use_shape
                  ? shape_.forward(clip, default_body_graph())
                  : Tensor<T>::zeros({shape_.out_dim()});
    auto fg = config_.use_gait ? gait_.forward(clip)
                               : Tensor<T>::zeros({gait_.out_dim()});
    return fusion_.forward(fa, fs, fg);
  }

  struct BatchOutput {
    Tensor<T> embeddings;  // [batch, fused_dim]
    Tensor<T> logits;      // [batch, num_classes]
  };

  BatchOutput forward_batch(const std::vector<Tensor<T>>& clips,
                            const std::vector<Tensor<T>>& appearances) const {
    if (clips.empty()) {
      raise(ErrorCode::data, "AsglModel: empty batch");
    }
    if (!appearances.empty() && appearances.size() != clips.size()) {
      raise(ErrorCode::dimension,
            "AsglModel: " + std::to_string(appearances.size()) +
                " appearance vectors for " + std::to_string(clips.size()) +
                " clips");
    }
    std::vector<Tensor<T>> rows;
    rows.reserve(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
      auto fe = embed(clips[i],
                      appearances.empty() ? Tensor<T>{} : appearances[i]);
      rows.push_back(reshape(fe.f, {std::size_t(1), fused_dim()}));
    }
    BatchOutput out;
    out.embeddings = concat(rows, 0);
    out.logits = classifier_.forward(out.embeddings);
    return out;
  }

  ParamList<T> params() {
    ParamList<T> out;
    shape_.collect("shape", out);
    gait_.collect("gait", out);
    if (sidecar_dim_ == 0) appearance_encoder_.collect("appearance", out);
    fusion_.collect("fusion", out);
    classifier_.collect("classifier", out);
    return out;
  }

 private:
  // Per-channel mean and spread of the clip, the built-in appearance
  // encoder's input. Constant w.r.t. the graph: appearance summarizes the
  // raw statistics, not a differentiable path through the keypoints.
  Tensor<T> statistics_input(const Tensor<T>& clip) const {
    KeypointClip kc;
    kc.frames = clip.dim(0);
    kc.joints.assign(clip.data().begin(), clip.data().end());
    auto stats = clip_statistics(kc);
    std::vector<T> vals(stats.begin(), stats.end());
    const std::size_t n = vals.size();
    return Tensor<T>::from_data({std::size_t(1), n}, std::move(vals));
  }

  ModelConfig<T> config_;
  std::size_t sidecar_dim_ = 0;
  ShapeBranch<T> shape_;
  GaitBranch<T> gait_;
  Mlp<T> appearance_encoder_;
  AdaptiveFusion<T> fusion_;
  Linear<T> classifier_;
};

}  // namespace asgl
