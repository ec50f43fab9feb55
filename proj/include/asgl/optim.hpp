#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/nn.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// Step decay: lr0 scaled by `decay` once per completed `step_epochs` block.
// The factor is applied by iterated multiplication, which reproduces the
// decimal literals of the published schedule bit-for-bit (unlike pow).
template <typename T>
T lr_schedule(T lr0, std::size_t epoch, std::size_t step_epochs, T decay) {
  if (step_epochs == 0) {
    raise(ErrorCode::config, "lr_schedule: decay interval must be positive");
  }
  T lr = lr0;
  for (std::size_t k = 0; k < epoch / step_epochs; ++k) lr *= decay;
  return lr;
}

// Adam with bias correction. Holds shared references to the parameter
// tensors, so stepping updates the owning model in place.
template <typename T>
class Adam {
 public:
  explicit Adam(ParamList<T> params, T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      p.tensor.set_requires_grad(true);
      m_.emplace_back(p.tensor.numel(), T(0));
      v_.emplace_back(p.tensor.numel(), T(0));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  void step(T lr) {
    if (!(lr > T(0))) {
      raise(ErrorCode::config, "Adam: learning rate must be positive");
    }
    ++t_;
    beta1_pow_ *= beta1_;
    beta2_pow_ *= beta2_;
    const T bc1 = T(1) - beta1_pow_;
    const T bc2 = T(1) - beta2_pow_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& data = params_[i].tensor.data();
      const auto& grad = params_[i].tensor.grad();
      for (std::size_t j = 0; j < data.size(); ++j) {
        const T g = grad[j];
        if (!std::isfinite(static_cast<double>(g))) {
          raise(ErrorCode::numeric,
                "Adam: non-finite gradient in " + params_[i].name);
        }
        m_[i][j] = beta1_ * m_[i][j] + (T(1) - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (T(1) - beta2_) * g * g;
        const T mhat = m_[i][j] / bc1;
        const T vhat = v_[i][j] / bc2;
        data[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::size_t step_count() const { return t_; }
  const ParamList<T>& params() const { return params_; }
  const std::vector<std::vector<T>>& moments_m() const { return m_; }
  const std::vector<std::vector<T>>& moments_v() const { return v_; }

  // Checkpoint restore. The bias-correction powers are replayed so that a
  // restored optimizer continues the exact arithmetic sequence.
  void restore(std::vector<std::vector<T>> m, std::vector<std::vector<T>> v,
               std::size_t t) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
      raise(ErrorCode::data, "Adam: checkpoint moment count " +
                                 std::to_string(m.size()) + " does not match " +
                                 std::to_string(params_.size()) +
                                 " parameters");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (m[i].size() != params_[i].tensor.numel() ||
          v[i].size() != params_[i].tensor.numel()) {
        raise(ErrorCode::data,
              "Adam: checkpoint moment size mismatch for " + params_[i].name);
      }
    }
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
    beta1_pow_ = beta2_pow_ = T(1);
    for (std::size_t k = 0; k < t_; ++k) {
      beta1_pow_ *= beta1_;
      beta2_pow_ *= beta2_;
    }
  }

 private:
  ParamList<T> params_;
  T beta1_, beta2_, eps_;
  T beta1_pow_ = T(1), beta2_pow_ = T(1);
  std::size_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace asgl
