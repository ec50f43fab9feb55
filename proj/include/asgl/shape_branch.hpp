#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/graph.hpp"
#include "asgl/nn.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// One graph attention layer over a skeleton. Each node's feature is
// transformed by a shared weight matrix; pairwise scores are a
// leaky-rectified linear form on the concatenated pair, realized as a
// per-node source term plus a per-node destination term; scores are
// softmax-normalized over each node's neighborhood (self included) and the
// normalized coefficients aggregate the transformed neighbor features.
template <typename T>
class GatLayer {
 public:
  GatLayer() = default;

  GatLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng, T score_slope,
           T activation_slope)
      : score_slope_(score_slope), activation_slope_(activation_slope) {
    const T bound = T(1) / std::sqrt(static_cast<T>(in_dim));
    weight_ = Tensor<T>::uniform({in_dim, out_dim}, -bound, bound, rng);
    weight_.set_requires_grad();
    const T abound = T(1) / std::sqrt(static_cast<T>(out_dim));
    attn_src_ = Tensor<T>::uniform({out_dim, 1}, -abound, abound, rng);
    attn_src_.set_requires_grad();
    attn_dst_ = Tensor<T>::uniform({out_dim, 1}, -abound, abound, rng);
    attn_dst_.set_requires_grad();
  }

  struct Result {
    Tensor<T> output;     // [nodes, out_dim]
    Tensor<T> attention;  // [nodes, nodes], rows sum to 1 over neighborhoods
  };

  Result forward_with_attention(const Tensor<T>& features,
                                const SkeletonGraph& graph) const {
    if (features.rank() != 2 || features.dim(0) != graph.num_nodes) {
      raise(ErrorCode::dimension,
            "GatLayer: features " + shape_str(features.shape()) +
                " do not match " + std::to_string(graph.num_nodes) +
                " graph nodes");
    }
    const std::size_t n = graph.num_nodes;
    auto z = matmul(features, weight_);  // [n, out]

    // score(i, j) = leaky(src_i + dst_j); build the [n, n] score matrix by
    // outer-broadcasting the two per-node columns.
    auto src = matmul(z, attn_src_);  // [n, 1]
    auto dst = matmul(z, attn_dst_);  // [n, 1]
    auto ones_row = Tensor<T>::full({1, n}, T(1));
    auto scores = add(matmul(src, ones_row),
                      transpose(matmul(dst, ones_row)));
    scores = leaky_relu(scores, score_slope_);

    auto mask = Tensor<T>::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      mask.data()[i * n + i] = T(1);
      for (int j : graph.adjacency[i]) {
        mask.data()[i * n + static_cast<std::size_t>(j)] = T(1);
      }
    }
    auto attention = masked_softmax_rows(scores, mask);
    if (debug_checks()) check_rows_normalized(attention, mask);
    auto out = leaky_relu(matmul_sorted(attention, z), activation_slope_);
    return {out, attention};
  }

  Tensor<T> forward(const Tensor<T>& features,
                    const SkeletonGraph& graph) const {
    return forward_with_attention(features, graph).output;
  }

  std::size_t out_dim() const { return weight_.dim(1); }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".attn_src", attn_src_});
    out.push_back({prefix + ".attn_dst", attn_dst_});
  }

 private:
  static void check_rows_normalized(const Tensor<T>& attention,
                                    const Tensor<T>& mask) {
    const std::size_t n = attention.dim(0);
    for (std::size_t i = 0; i < n; ++i) {
      T row = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        const T a = attention.data()[i * n + j];
        if (mask.data()[i * n + j] == T(0) && a != T(0)) {
          raise(ErrorCode::numeric,
                "GatLayer: attention outside the neighborhood of node " +
                    std::to_string(i));
        }
        row += a;
      }
      if (std::fabs(static_cast<double>(row) - 1.0) > 1e-6) {
        raise(ErrorCode::numeric, "GatLayer: attention row " +
                                      std::to_string(i) + " sums to " +
                                      std::to_string(row));
      }
    }
  }

  Tensor<T> weight_;
  Tensor<T> attn_src_;  // [out, 1]
  Tensor<T> attn_dst_;  // [out, 1]
  T score_slope_ = T(0.2);
  T activation_slope_ = T(0.01);
};

template <typename T>
struct ShapeBranchConfig {
  std::vector<std::size_t> refine_dims{128, 512, 2048};
  std::vector<std::size_t> gat_dims{256, 256};
  T score_slope = T(0.2);
  T activation_slope = T(0.01);
};

// Keypoint refinement followed by stacked graph attention, max-pooled over
// joints per frame and mean-pooled over frames to the clip-level shape
// embedding. Pooling uses symmetric reductions, so the embedding is exactly
// invariant to joint relabeling (with the skeleton permuted along) and to
// frame order.
template <typename T>
class ShapeBranch {
 public:
  ShapeBranch() = default;

  ShapeBranch(const ShapeBranchConfig<T>& config, Rng& rng)
      : refine_(3, config.refine_dims, rng, config.activation_slope) {
    std::size_t d = config.refine_dims.back();
    for (std::size_t out : config.gat_dims) {
      gat_layers_.emplace_back(d, out, rng, config.score_slope,
                               config.activation_slope);
      d = out;
    }
    if (gat_layers_.empty()) {
      raise(ErrorCode::config, "ShapeBranch: no attention layers configured");
    }
  }

  // [frames * joints, 3] -> [frames * joints, refine_dims.back()]; the MLP
  // applies to every (frame, joint) row identically.
  Tensor<T> refine(const Tensor<T>& keypoints) const {
    if (keypoints.rank() != 2 || keypoints.dim(1) != 3) {
      raise(ErrorCode::dimension, "ShapeBranch: keypoints must be [rows, 3], got " +
                                      shape_str(keypoints.shape()));
    }
    return refine_.forward(keypoints);
  }

  // Refined single frame [joints, d] -> per-frame embedding [out_dim]
  // via the attention stack and a channelwise max over joints.
  Tensor<T> frame_embedding(const Tensor<T>& refined_frame,
                            const SkeletonGraph& graph) const {
    Tensor<T> h = refined_frame;
    for (const auto& layer : gat_layers_) h = layer.forward(h, graph);
    return max_axis(h, 0);
  }

  // Normalized clip [frames, joints, 3] -> shape embedding [out_dim].
  Tensor<T> forward(const Tensor<T>& clip, const SkeletonGraph& graph) const {
    if (clip.rank() != 3 || clip.dim(2) != 3) {
      raise(ErrorCode::dimension,
            "ShapeBranch: clip must be [frames, joints, 3], got " +
                shape_str(clip.shape()));
    }
    const std::size_t frames = clip.dim(0), joints = clip.dim(1);
    auto refined = refine(reshape(clip, {frames * joints, 3}));
    auto per_frame = reshape(refined, {frames, joints, refined.dim(1)});
    std::vector<Tensor<T>> embeddings;
    embeddings.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      embeddings.push_back(frame_embedding(slice_axis0(per_frame, t), graph));
    }
    return mean_axis0_sorted(stack_rows(embeddings));
  }

  std::size_t out_dim() const { return gat_layers_.back().out_dim(); }
  std::vector<GatLayer<T>>& gat_layers() { return gat_layers_; }
  Mlp<T>& refine_net() { return refine_; }

  void collect(const std::string& prefix, ParamList<T>& out) {
    refine_.collect(prefix + ".refine", out);
    for (std::size_t i = 0; i < gat_layers_.size(); ++i) {
      gat_layers_[i].collect(prefix + ".gat" + std::to_string(i), out);
    }
  }

 private:
  Mlp<T> refine_;
  std::vector<GatLayer<T>> gat_layers_;
};

}  // namespace asgl
