#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/graph.hpp"
#include "asgl/kernels.hpp"
#include "asgl/nn.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// Weight-sharing pattern of the group mixer: every in-group (i, l) pair gets
// a weight indexed by the relative frame offset and the ordered joint pair,
// so one motion pattern applies at every frame position. With circular time
// the offset wraps, making the mixer exactly shift-equivariant.
struct MixKeys {
  std::vector<std::size_t> pair_key;  // compact key per pair, pair order
  std::size_t num_keys = 0;
  std::vector<bool> key_is_identity;  // key relates a node to itself
};

inline MixKeys build_mix_keys(const StGraph& graph,
                              const std::vector<std::pair<int, int>>& pairs) {
  const std::size_t k = graph.joints;
  const std::size_t frames = graph.frames;
  std::unordered_map<std::size_t, std::size_t> compact;
  MixKeys out;
  out.pair_key.reserve(pairs.size());
  for (auto [i, l] : pairs) {
    const std::size_t ti = static_cast<std::size_t>(i) / k;
    const std::size_t ji = static_cast<std::size_t>(i) % k;
    const std::size_t tl = static_cast<std::size_t>(l) / k;
    const std::size_t jl = static_cast<std::size_t>(l) % k;
    // graph distance never exceeds frames, so the shifted offset is unique
    const std::size_t dt = graph.circular_time ? (tl + frames - ti) % frames
                                               : tl + frames - ti;
    const std::size_t raw = (dt * k + ji) * k + jl;
    auto [it, inserted] = compact.emplace(raw, compact.size());
    if (inserted) {
      const bool self = ji == jl && (graph.circular_time ? dt == 0
                                                         : dt == frames);
      out.key_is_identity.push_back(self);
    }
    out.pair_key.push_back(it->second);
  }
  out.num_keys = compact.size();
  return out;
}

// One spatial-temporal attention block: S masked scaled-dot attention heads
// averaged and activated, a group-confined mixer with a channel-mixing
// layer, a depthwise temporal convolution, and a residual connection
// (projected when the channel count changes).
template <typename T>
class StaBlock {
 public:
  StaBlock() = default;

  StaBlock(std::size_t in_ch, std::size_t out_ch, std::size_t heads,
           const StGraph& graph, const std::vector<std::vector<int>>& groups,
           Rng& rng, T activation_slope)
      : frames_(graph.frames),
        joints_(graph.joints),
        out_ch_(out_ch),
        pad_(graph.circular_time ? kernels::Pad::circular
                                 : kernels::Pad::zero),
        slope_(activation_slope) {
    if (heads == 0) {
      raise(ErrorCode::config, "StaBlock: at least one attention head");
    }
    const std::size_t n = graph.num_nodes();
    if (groups.size() != n) {
      raise(ErrorCode::dimension, "StaBlock: " + std::to_string(groups.size()) +
                                      " groups for " + std::to_string(n) +
                                      " nodes");
    }
    auto mask_bytes = partition_mask(groups, n);
    mask_ = Tensor<T>::zeros({n, n});
    for (std::size_t i = 0; i < mask_bytes.size(); ++i) {
      mask_.data()[i] = static_cast<T>(mask_bytes[i]);
    }
    auto pairs = group_pairs(groups);
    rows_.reserve(pairs.size());
    cols_.reserve(pairs.size());
    for (auto [i, l] : pairs) {
      rows_.push_back(static_cast<std::size_t>(i));
      cols_.push_back(static_cast<std::size_t>(l));
    }
    keys_ = build_mix_keys(graph, pairs);
    mix_weights_ = Tensor<T>::zeros({keys_.num_keys});
    for (std::size_t key = 0; key < keys_.num_keys; ++key) {
      if (keys_.key_is_identity[key]) mix_weights_.data()[key] = T(1);
    }
    mix_weights_.set_requires_grad();

    // query/key width matches the output channels for every head, so a
    // single-head block accepts the same per-head weights as a multi-head one
    key_dim_ = out_ch;
    const T bound = T(1) / std::sqrt(static_cast<T>(in_ch));
    for (std::size_t s = 0; s < heads; ++s) {
      Head h;
      h.wq = Tensor<T>::uniform({in_ch, key_dim_}, -bound, bound, rng);
      h.wk = Tensor<T>::uniform({in_ch, key_dim_}, -bound, bound, rng);
      h.wv = Tensor<T>::uniform({in_ch, out_ch}, -bound, bound, rng);
      h.wq.set_requires_grad();
      h.wk.set_requires_grad();
      h.wv.set_requires_grad();
      heads_.push_back(std::move(h));
    }
    mix_linear_ = Linear<T>(out_ch, out_ch, rng);
    const T kbound = T(1) / std::sqrt(T(3));
    temporal_kernel_ = Tensor<T>::uniform({out_ch, 3}, -kbound, kbound, rng);
    temporal_kernel_.set_requires_grad();
    if (in_ch != out_ch) {
      res_proj_ = Linear<T>(in_ch, out_ch, rng, false);
    }
  }

  struct AttentionResult {
    Tensor<T> output;                       // [nodes, out_ch]
    std::vector<Tensor<T>> head_attention;  // [nodes, nodes] each
  };

  // sigma of the head-averaged masked attention stage
  AttentionResult attention_stage_with_maps(const Tensor<T>& x) const {
    check_input(x);
    AttentionResult res;
    Tensor<T> sum;
    const T scale = T(1) / std::sqrt(static_cast<T>(key_dim_));
    for (std::size_t s = 0; s < heads_.size(); ++s) {
      auto q = matmul(x, heads_[s].wq);
      auto k = matmul(x, heads_[s].wk);
      auto scores = affine(matmul(q, transpose(k)), scale, T(0));
      auto a = masked_softmax_rows(scores, mask_);
      if (debug_checks()) check_masked(a);
      auto h = matmul_sorted(a, matmul(x, heads_[s].wv));
      sum = s == 0 ? h : add(sum, h);
      res.head_attention.push_back(std::move(a));
    }
    const T inv = T(1) / static_cast<T>(heads_.size());
    res.output = leaky_relu(affine(sum, inv, T(0)), slope_);
    return res;
  }

  Tensor<T> attention_stage(const Tensor<T>& x) const {
    return attention_stage_with_maps(x).output;
  }

  // group-confined node mixing followed by per-node channel mixing
  Tensor<T> mix_stage(const Tensor<T>& att) const {
    const std::size_t n = frames_ * joints_;
    auto dense = scatter_to_dense(gather_values(mix_weights_, keys_.pair_key),
                                  rows_, cols_, n, n);
    return mix_linear_.forward(matmul_sorted(dense, att));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto att = attention_stage(x);
    auto mixed = mix_stage(att);
    auto frames_view = reshape(mixed, {frames_, joints_, out_ch_});
    auto conv = conv1d_temporal(frames_view, temporal_kernel_, pad_);
    auto y = reshape(conv, {frames_ * joints_, out_ch_});
    auto residual = res_proj_.weight().defined() ? res_proj_.forward(x) : x;
    return add(y, residual);
  }

  std::size_t out_dim() const { return out_ch_; }
  std::size_t num_heads() const { return heads_.size(); }
  const Tensor<T>& mask() const { return mask_; }
  Tensor<T>& mix_weights() { return mix_weights_; }
  Linear<T>& mix_linear() { return mix_linear_; }
  Tensor<T>& temporal_kernel() { return temporal_kernel_; }
  const MixKeys& mix_keys() const { return keys_; }
  Tensor<T>& head_weight(std::size_t s, int which) {
    return which == 0 ? heads_[s].wq : which == 1 ? heads_[s].wk
                                                  : heads_[s].wv;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t s = 0; s < heads_.size(); ++s) {
      const std::string h = prefix + ".head" + std::to_string(s);
      out.push_back({h + ".wq", heads_[s].wq});
      out.push_back({h + ".wk", heads_[s].wk});
      out.push_back({h + ".wv", heads_[s].wv});
    }
    out.push_back({prefix + ".mix_weights", mix_weights_});
    mix_linear_.collect(prefix + ".mix", out);
    out.push_back({prefix + ".temporal", temporal_kernel_});
    if (res_proj_.weight().defined()) {
      res_proj_.collect(prefix + ".res_proj", out);
    }
  }

 private:
  struct Head {
    Tensor<T> wq, wk, wv;
  };

  void check_input(const Tensor<T>& x) const {
    const std::size_t n = frames_ * joints_;
    if (x.rank() != 2 || x.dim(0) != n) {
      raise(ErrorCode::dimension, "StaBlock: features " +
                                      shape_str(x.shape()) + " do not match " +
                                      std::to_string(n) + " graph nodes");
    }
  }

  void check_masked(const Tensor<T>& a) const {
    const std::size_t n = frames_ * joints_;
    for (std::size_t i = 0; i < n * n; ++i) {
      if (mask_.data()[i] == T(0) && a.data()[i] != T(0)) {
        raise(ErrorCode::numeric,
              "StaBlock: attention outside the partition mask at entry " +
                  std::to_string(i));
      }
    }
  }

  std::size_t frames_ = 0;
  std::size_t joints_ = 0;
  std::size_t out_ch_ = 0;
  std::size_t key_dim_ = 1;
  kernels::Pad pad_ = kernels::Pad::zero;
  T slope_ = T(0.01);
  Tensor<T> mask_;
  std::vector<std::size_t> rows_, cols_;
  MixKeys keys_;
  Tensor<T> mix_weights_;
  std::vector<Head> heads_;
  Linear<T> mix_linear_;
  Tensor<T> temporal_kernel_;
  Linear<T> res_proj_;
};

template <typename T>
struct GaitBranchConfig {
  std::vector<std::size_t> channels{128, 256};
  std::size_t heads = 4;
  int partition_hops = 3;
  T activation_slope = T(0.01);
  bool circular_time = false;
};

// Stacked spatial-temporal attention blocks over the skeleton-times-frames
// graph, mean-pooled over every node to the clip-level gait embedding.
template <typename T>
class GaitBranch {
 public:
  GaitBranch() = default;

  GaitBranch(const GaitBranchConfig<T>& config, const SkeletonGraph& skeleton,
             std::size_t clip_len, Rng& rng)
      : graph_(build_st_graph(skeleton, clip_len, config.circular_time)) {
    if (config.channels.empty()) {
      raise(ErrorCode::config, "GaitBranch: no block channels configured");
    }
    groups_ = partition_neighbors(graph_, config.partition_hops);
    std::size_t in = 3;
    for (std::size_t out : config.channels) {
      blocks_.emplace_back(in, out, config.heads, graph_, groups_, rng,
                           config.activation_slope);
      in = out;
    }
  }

  // Normalized clip [frames, joints, 3] -> gait embedding [out_dim]
  Tensor<T> forward(const Tensor<T>& clip) const {
    if (clip.rank() != 3 || clip.dim(0) != graph_.frames ||
        clip.dim(1) != graph_.joints || clip.dim(2) != 3) {
      raise(ErrorCode::dimension,
            "GaitBranch: clip " + shape_str(clip.shape()) + " does not match " +
                std::to_string(graph_.frames) + "x" +
                std::to_string(graph_.joints) + "x3");
    }
    Tensor<T> x = reshape(clip, {graph_.num_nodes(), std::size_t(3)});
    for (const auto& block : blocks_) x = block.forward(x);
    return mean_axis0_sorted(x);
  }

  std::size_t out_dim() const { return blocks_.back().out_dim(); }
  const StGraph& graph() const { return graph_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  std::vector<StaBlock<T>>& blocks() { return blocks_; }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b].collect(prefix + ".block" + std::to_string(b), out);
    }
  }

 private:
  StGraph graph_;
  std::vector<std::vector<int>> groups_;
  std::vector<StaBlock<T>> blocks_;
};

}  // namespace asgl
