#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/rng.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// A named handle on a parameter tensor. The Tensor shares its node with the
// owning layer, so writing through the list updates the layer and the list
// order gives optimizers a stable parameter identity.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Fully connected layer, y = x W + b with W stored [in, out]. Weights and
// bias start uniform in [-1/sqrt(in), 1/sqrt(in)].
template <typename T>
class Linear {
 public:
  Linear() = default;

  Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng, bool bias = true) {
    if (in_dim == 0 || out_dim == 0) {
      raise(ErrorCode::config, "Linear: zero dimension (" +
                                   std::to_string(in_dim) + " -> " +
                                   std::to_string(out_dim) + ")");
    }
    const T bound = T(1) / std::sqrt(static_cast<T>(in_dim));
    weight_ = Tensor<T>::uniform({in_dim, out_dim}, -bound, bound, rng);
    weight_.set_requires_grad();
    if (bias) {
      bias_ = Tensor<T>::uniform({out_dim}, -bound, bound, rng);
      bias_.set_requires_grad();
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto y = matmul(x, weight_);
    if (bias_.defined()) y = broadcast_add_bias(y, bias_);
    return y;
  }

  std::size_t in_dim() const { return weight_.dim(0); }
  std::size_t out_dim() const { return weight_.dim(1); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", weight_});
    if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
  }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

// Stack of Linear layers with a leaky-rectifier after each one
// (the final layer included when activate_last is set).
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::size_t in_dim, const std::vector<std::size_t>& dims, Rng& rng,
      T slope, bool activate_last = true)
      : slope_(slope), activate_last_(activate_last) {
    if (dims.empty()) {
      raise(ErrorCode::config, "Mlp: no layer dimensions given");
    }
    std::size_t d = in_dim;
    for (std::size_t out : dims) {
      layers_.emplace_back(d, out, rng);
      d = out;
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (activate_last_ || i + 1 < layers_.size()) {
        h = leaky_relu(h, slope_);
      }
    }
    return h;
  }

  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::vector<Linear<T>>& layers() { return layers_; }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect(prefix + ".fc" + std::to_string(i), out);
    }
  }

 private:
  std::vector<Linear<T>> layers_;
  T slope_ = T(0.01);
  bool activate_last_ = true;
};

}  // namespace asgl
