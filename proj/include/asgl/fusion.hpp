#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/nn.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

template <typename T>
struct FusedEmbedding {
  Tensor<T> f;        // [fused_dim]
  Tensor<T> weights;  // [3]: appearance, shape, gait; sums to 1
};

// Projects the three modality embeddings onto one latent dimension, derives
// softmax weights from their concatenation, and blends the projections.
template <typename T>
class AdaptiveFusion {
 public:
  AdaptiveFusion() = default;

  AdaptiveFusion(std::size_t dim_a, std::size_t dim_s, std::size_t dim_g,
                 std::size_t fused_dim, Rng& rng)
      : proj_a_(dim_a, fused_dim, rng),
        proj_s_(dim_s, fused_dim, rng),
        proj_g_(dim_g, fused_dim, rng),
        gate_(3 * fused_dim, 3, rng) {}

  FusedEmbedding<T> forward(const Tensor<T>& f_a, const Tensor<T>& f_s,
                            const Tensor<T>& f_g) const {
    auto pa = project(proj_a_, f_a, "appearance");
    auto ps = project(proj_s_, f_s, "shape");
    auto pg = project(proj_g_, f_g, "gait");
    auto logits = gate_.forward(concat({pa, ps, pg}, 1));  // [1, 3]
    return combine(pa, ps, pg, softmax_rows(logits));
  }

  // f = w_a p_a + w_s p_s + w_g p_g for projected inputs [1, fused_dim] and
  // weights [1, 3]. Exposed so tests can force the weights.
  FusedEmbedding<T> combine(const Tensor<T>& pa, const Tensor<T>& ps,
                            const Tensor<T>& pg, const Tensor<T>& w) const {
    if (w.rank() != 2 || w.dim(0) != 1 || w.dim(1) != 3) {
      raise(ErrorCode::dimension,
            "AdaptiveFusion: weights must be [1, 3], got " +
                shape_str(w.shape()));
    }
    for (const auto* p : {&pa, &ps, &pg}) {
      if (p->rank() != 2 || p->dim(0) != 1 || p->dim(1) != fused_dim()) {
        raise(ErrorCode::dimension,
              "AdaptiveFusion: projected embedding " + shape_str(p->shape()) +
                  " does not match latent dimension " +
                  std::to_string(fused_dim()));
      }
    }
    if (debug_checks()) {
      const double sum = static_cast<double>(w.data()[0]) + w.data()[1] +
                         w.data()[2];
      if (std::fabs(sum - 1.0) > 1e-6) {
        raise(ErrorCode::numeric, "AdaptiveFusion: weights sum to " +
                                      std::to_string(sum));
      }
    }
    auto stacked = concat({pa, ps, pg}, 0);  // [3, fused_dim]
    auto f = matmul(w, stacked);             // [1, fused_dim]
    return {reshape(f, {fused_dim()}), reshape(w, {std::size_t(3)})};
  }

  std::size_t fused_dim() const { return proj_a_.out_dim(); }
  Linear<T>& proj_a() { return proj_a_; }
  Linear<T>& proj_s() { return proj_s_; }
  Linear<T>& proj_g() { return proj_g_; }
  Linear<T>& gate() { return gate_; }

  void collect(const std::string& prefix, ParamList<T>& out) {
    proj_a_.collect(prefix + ".proj_a", out);
    proj_s_.collect(prefix + ".proj_s", out);
    proj_g_.collect(prefix + ".proj_g", out);
    gate_.collect(prefix + ".gate", out);
  }

 private:
  Tensor<T> project(const Linear<T>& proj, const Tensor<T>& f,
                    const char* name) const {
    if (f.rank() != 1 || f.dim(0) != proj.in_dim()) {
      raise(ErrorCode::dimension,
            std::string("AdaptiveFusion: ") + name + " embedding " +
                shape_str(f.shape()) + " does not match input dimension " +
                std::to_string(proj.in_dim()));
    }
    return proj.forward(reshape(f, {std::size_t(1), f.dim(0)}));
  }

  Linear<T> proj_a_, proj_s_, proj_g_;
  Linear<T> gate_;
};

template <typename T>
struct LossConfig {
  T lambda1 = T(0.7);  // cross-entropy weight
  T lambda2 = T(0.3);  // triplet weight
  T margin = T(0.3);
};

// Mean negative log-likelihood of the true identity over the batch.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits,
                             const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    raise(ErrorCode::dimension,
          "cross_entropy_loss: logits " + shape_str(logits.shape()) +
              " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = labels.size(), classes = logits.dim(1);
  auto onehot = Tensor<T>::zeros({batch, classes});
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes) {
      raise(ErrorCode::data, "cross_entropy_loss: label " +
                                 std::to_string(labels[i]) + " outside " +
                                 std::to_string(classes) + " identities");
    }
    onehot.data()[i * classes + labels[i]] = T(1);
  }
  auto picked = mul(log_softmax_rows(logits), onehot);
  return affine(sum_all(picked), -T(1) / static_cast<T>(batch), T(0));
}

template <typename T>
struct TripletResult {
  Tensor<T> loss;  // scalar
  std::vector<std::size_t> hardest_positive;  // per anchor
  std::vector<std::size_t> hardest_negative;
};

template <typename T>
Tensor<T> pair_distance(const Tensor<T>& a, const Tensor<T>& b, T eps) {
  auto diff = sub(a, b);
  return sqrt_op(affine(sum_all(mul(diff, diff)), T(1), eps));
}

// Batch-hard triplet loss: per anchor, the farthest clip of the same person
// and the nearest clip of any other person by euclidean distance; mean
// rectified margin violation over anchors. Requires every identity in the
// batch to appear at least twice and at least two identities.
template <typename T>
TripletResult<T> batch_hard_triplet(const Tensor<T>& embeddings,
                                    const std::vector<std::size_t>& labels,
                                    T margin) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != labels.size()) {
    raise(ErrorCode::dimension,
          "batch_hard_triplet: embeddings " + shape_str(embeddings.shape()) +
              " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = labels.size(), dim = embeddings.dim(1);
  const auto& ev = embeddings.data();
  std::vector<double> dist(batch * batch, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = i + 1; j < batch; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff =
            static_cast<double>(ev[i * dim + c]) - ev[j * dim + c];
        d2 += diff * diff;
      }
      dist[i * batch + j] = dist[j * batch + i] = std::sqrt(d2);
    }
  }

  TripletResult<T> res;
  res.hardest_positive.resize(batch);
  res.hardest_negative.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    bool has_pos = false, has_neg = false;
    std::size_t pos = 0, neg = 0;
    for (std::size_t j = 0; j < batch; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        if (!has_pos || dist[i * batch + j] > dist[i * batch + pos]) pos = j;
        has_pos = true;
      } else {
        if (!has_neg || dist[i * batch + j] < dist[i * batch + neg]) neg = j;
        has_neg = true;
      }
    }
    if (!has_pos) {
      raise(ErrorCode::data, "batch_hard_triplet: identity " +
                                 std::to_string(labels[i]) +
                                 " has a single clip in the batch");
    }
    if (!has_neg) {
      raise(ErrorCode::data,
            "batch_hard_triplet: the batch holds a single identity");
    }
    res.hardest_positive[i] = pos;
    res.hardest_negative[i] = neg;
  }

  // differentiable distances only for the mined pairs; the small offset
  // keeps sqrt smooth when two embeddings coincide
  const T eps = T(1e-12);
  std::vector<Tensor<T>> violations;
  violations.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    auto anchor = slice_axis0(embeddings, i);
    auto dpos = pair_distance(anchor,
                              slice_axis0(embeddings, res.hardest_positive[i]),
                              eps);
    auto dneg = pair_distance(anchor,
                              slice_axis0(embeddings, res.hardest_negative[i]),
                              eps);
    violations.push_back(relu(affine(sub(dpos, dneg), T(1), margin)));
  }
  res.loss = mean_all(concat(violations, 0));
  return res;
}

// lambda1 * ce + lambda2 * tri with both components checked finite.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& ce, const Tensor<T>& tri,
                     const LossConfig<T>& config) {
  if (config.lambda1 < T(0) || config.lambda2 < T(0)) {
    raise(ErrorCode::config, "total_loss: negative loss weight");
  }
  if (!std::isfinite(static_cast<double>(ce.item()))) {
    raise(ErrorCode::numeric, "total_loss: cross-entropy loss is not finite");
  }
  if (!std::isfinite(static_cast<double>(tri.item()))) {
    raise(ErrorCode::numeric, "total_loss: triplet loss is not finite");
  }
  return add(affine(ce, config.lambda1, T(0)),
             affine(tri, config.lambda2, T(0)));
}

}  // namespace asgl
