#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// Central-difference gradient verification, 64-bit only. f must be a pure
// scalar function of the given inputs (it is re-evaluated many times).
// Returns the worst relative error, measured against
// max(|analytic|, |numeric|, 1) so that near-zero gradients are compared on
// an absolute scale instead of amplifying round-off.
inline double grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
    std::vector<Tensor<double>> inputs, double step = 1e-5) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Tensor<double> out = f(inputs);
  if (out.numel() != 1) {
    raise(ErrorCode::dimension,
          "grad_check: function output of shape " + shape_str(out.shape()) +
              " is not a scalar");
  }
  if (!std::isfinite(out.item())) {
    raise(ErrorCode::numeric, "grad_check: function value is not finite");
  }
  out.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) analytic.push_back(in.grad());

  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& values = inputs[t].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      double up = 0.0, down = 0.0;
      {
        NoGradGuard ng;
        values[i] = orig + step;
        up = f(inputs).item();
        values[i] = orig - step;
        down = f(inputs).item();
        values[i] = orig;
      }
      if (!std::isfinite(up) || !std::isfinite(down)) {
        raise(ErrorCode::numeric,
              "grad_check: non-finite value while perturbing input " +
                  std::to_string(t) + " element " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[t][i];
      if (!std::isfinite(a)) {
        raise(ErrorCode::numeric,
              "grad_check: non-finite analytic gradient at input " +
                  std::to_string(t) + " element " + std::to_string(i));
      }
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), 1.0});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace asgl
