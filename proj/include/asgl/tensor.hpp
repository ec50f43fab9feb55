#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/kernels.hpp"
#include "asgl/rng.hpp"

namespace asgl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Extra invariant checks inside forward passes (attention rows summing to 1,
// masked entries exactly zero). Off by default; tests switch it on.
inline std::atomic<bool>& debug_checks() {
  static std::atomic<bool> on{false};
  return on;
}

namespace autodiff_detail {

// Thread-local so independent graphs can run on different threads.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace autodiff_detail

// Disables gradient tracking for its scope (evaluation, finite differences).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(autodiff_detail::grad_mode()) {
    autodiff_detail::grad_mode() = false;
  }
  ~NoGradGuard() { autodiff_detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // sized iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

// Value-semantic handle to a node of the computation graph. Gradients of
// leaves accumulate across backward() calls until zero_grad() is called;
// every backward() over a fresh forward graph adds each leaf's contribution
// exactly once.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> node)
      : node_(std::move(node)) {}

  static Tensor zeros(Shape shape) {
    return full(std::move(shape), T(0));
  }

  static Tensor full(Shape shape, T value) {
    auto n = std::make_shared<TensorNode<T>>();
    n->data.assign(shape_numel(shape), value);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape shape, std::vector<T> values) {
    if (values.size() != shape_numel(shape)) {
      raise(ErrorCode::dimension,
            "Tensor::from_data: " + std::to_string(values.size()) +
                " values do not fill shape " + shape_str(shape));
    }
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    return Tensor(std::move(n));
  }

  template <typename U>
  static Tensor from_other(Shape shape, const std::vector<U>& values) {
    std::vector<T> converted(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      converted[i] = static_cast<T>(values[i]);
    }
    return from_data(std::move(shape), std::move(converted));
  }

  static Tensor scalar(T v) { return full({1}, v); }

  static Tensor uniform(Shape shape, T lo, T hi, Rng& rng) {
    auto t = zeros(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return check().shape; }
  std::size_t rank() const { return check().shape.size(); }
  std::size_t numel() const { return check().data.size(); }

  std::size_t dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
      raise(ErrorCode::dimension,
            "Tensor::dim: axis " + std::to_string(axis) +
                " out of range for shape " + shape_str(s));
    }
    return s[axis];
  }

  std::vector<T>& data() { return check().data; }
  const std::vector<T>& data() const { return check().data; }

  bool requires_grad() const { return check().requires_grad; }

  Tensor& set_requires_grad(bool on = true) {
    auto& n = check();
    n.requires_grad = on;
    if (on) n.ensure_grad();
    return *this;
  }

  const std::vector<T>& grad() const {
    const auto& n = check();
    if (!n.requires_grad) {
      raise(ErrorCode::dimension,
            "Tensor::grad: tensor does not require gradients");
    }
    return n.grad;
  }

  void zero_grad() {
    auto& n = check();
    if (n.requires_grad) n.grad.assign(n.data.size(), T(0));
  }

  T item() const {
    const auto& n = check();
    if (n.data.size() != 1) {
      raise(ErrorCode::dimension, "Tensor::item: tensor of shape " +
                                      shape_str(n.shape) + " is not a scalar");
    }
    return n.data[0];
  }

  T at(std::initializer_list<std::size_t> idx) const {
    const auto& n = check();
    if (idx.size() != n.shape.size()) {
      raise(ErrorCode::dimension, "Tensor::at: rank mismatch for shape " +
                                      shape_str(n.shape));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= n.shape[axis]) {
        raise(ErrorCode::dimension, "Tensor::at: index out of range for shape " +
                                        shape_str(n.shape));
      }
      flat = flat * n.shape[axis] + i;
      ++axis;
    }
    return n.data[flat];
  }

  std::vector<double> to_double() const {
    const auto& d = check().data;
    return std::vector<double>(d.begin(), d.end());
  }

  // Reverse pass from a scalar root. Accumulates into leaf grads.
  void backward() const {
    auto& root = check();
    if (root.data.size() != 1) {
      raise(ErrorCode::dimension, "Tensor::backward: root of shape " +
                                      shape_str(root.shape) +
                                      " is not a scalar");
    }
    if (!root.requires_grad) {
      raise(ErrorCode::dimension,
            "Tensor::backward: root does not require gradients");
    }
    std::vector<TensorNode<T>*> order;
    std::unordered_set<const TensorNode<T>*> visited;
    std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& top = stack.back();
      if (top.second < top.first->parents.size()) {
        TensorNode<T>* parent = top.first->parents[top.second].get();
        ++top.second;
        if (visited.insert(parent).second) stack.emplace_back(parent, 0);
      } else {
        order.push_back(top.first);
        stack.pop_back();
      }
    }
    root.ensure_grad();
    root.grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

  std::shared_ptr<TensorNode<T>> handle() const { return node_; }

 private:
  TensorNode<T>& check() const {
    if (!node_) raise(ErrorCode::dimension, "Tensor: undefined tensor handle");
    return *node_;
  }

  std::shared_ptr<TensorNode<T>> node_;
};

namespace autodiff_detail {

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::vector<std::shared_ptr<TensorNode<T>>> parents,
                      std::function<void(TensorNode<T>&)> backward_fn) {
  if (shape_numel(shape) != data.size()) {
    raise(ErrorCode::dimension,
          "internal: result shape " + shape_str(shape) + " does not hold " +
              std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool track = grad_mode();
  if (track) {
    bool any = false;
    for (const auto& p : parents) any = any || (p && p->requires_grad);
    track = any;
  }
  if (track) {
    node->requires_grad = true;
    node->ensure_grad();
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a,
                        const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    raise(ErrorCode::dimension, std::string(op) + ": shapes differ, " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& x, std::size_t r) {
  if (x.rank() != r) {
    raise(ErrorCode::dimension, std::string(op) + ": expected rank " +
                                    std::to_string(r) + " tensor, got shape " +
                                    shape_str(x.shape()));
  }
}

}  // namespace autodiff_detail

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  autodiff_detail::require_same_shape("add", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return autodiff_detail::make_result<T>(
      a.shape(), std::move(y), {a.handle(), b.handle()},
      [](TensorNode<T>& self) {
        for (int pi = 0; pi < 2; ++pi) {
          auto& p = *self.parents[pi];
          if (!p.requires_grad) continue;
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += self.grad[i];
          }
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  autodiff_detail::require_same_shape("sub", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return autodiff_detail::make_result<T>(
      a.shape(), std::move(y), {a.handle(), b.handle()},
      [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (pa.requires_grad) pa.grad[i] += self.grad[i];
          if (pb.requires_grad) pb.grad[i] -= self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  autodiff_detail::require_same_shape("mul", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return autodiff_detail::make_result<T>(
      a.shape(), std::move(y), {a.handle(), b.handle()},
      [](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
          if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
        }
      });
}

// y = scale * x + shift, elementwise with scalar constants.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = scale * xv[i] + shift;
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [scale](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += scale * self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > T(0) ? xv[i] : T(0);
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (p.data[i] > T(0)) p.grad[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [slope](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] * (p.data[i] > T(0) ? T(1) : slope);
        }
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = xv[i];
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const T s = self.data[i];
          p.grad[i] += self.grad[i] * s * (T(1) - s);
        }
      });
}

template <typename T>
Tensor<T> sqrt_op(const Tensor<T>& x) {
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (xv[i] < T(0)) {
      raise(ErrorCode::numeric, "sqrt: negative input " +
                                    std::to_string(static_cast<double>(xv[i])));
    }
    y[i] = std::sqrt(xv[i]);
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] * T(0.5) / self.data[i];
        }
      });
}

// ---- shape manipulation ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    raise(ErrorCode::dimension, "reshape: cannot view " +
                                    shape_str(x.shape()) + " as " +
                                    shape_str(shape));
  }
  std::vector<T> y = x.data();
  return autodiff_detail::make_result<T>(
      std::move(shape), std::move(y), {x.handle()}, [](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  autodiff_detail::require_rank("transpose", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = xv[i * n + j];
  }
  return autodiff_detail::make_result<T>(
      {n, m}, std::move(y), {x.handle()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] += self.grad[j * m + i];
          }
        }
      });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) {
    raise(ErrorCode::dimension, "concat: no tensors given");
  }
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    raise(ErrorCode::dimension, "concat: axis " + std::to_string(axis) +
                                    " out of range for shape " +
                                    shape_str(first));
  }
  std::size_t total_extent = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) {
      raise(ErrorCode::dimension, "concat: rank mismatch, " +
                                      shape_str(first) + " vs " + shape_str(s));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        raise(ErrorCode::dimension, "concat: shapes differ off axis, " +
                                        shape_str(first) + " vs " +
                                        shape_str(s));
      }
    }
    total_extent += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_extent;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<T> y(shape_numel(out_shape));
  std::vector<std::size_t> extents(parts.size());
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  parents.reserve(parts.size());
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t e = parts[p].shape()[axis];
    extents[p] = e;
    const auto& src = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(o * e * inner),
                src.begin() + static_cast<std::ptrdiff_t>((o + 1) * e * inner),
                y.begin() + static_cast<std::ptrdiff_t>(
                                (o * total_extent + off) * inner));
    }
    off += e;
    parents.push_back(parts[p].handle());
  }
  return autodiff_detail::make_result<T>(
      std::move(out_shape), std::move(y), std::move(parents),
      [outer, inner, total_extent, extents](TensorNode<T>& self) {
        std::size_t off2 = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
          auto& par = *self.parents[p];
          const std::size_t e = extents[p];
          if (par.requires_grad) {
            for (std::size_t o = 0; o < outer; ++o) {
              for (std::size_t i = 0; i < e * inner; ++i) {
                par.grad[o * e * inner + i] +=
                    self.grad[(o * total_extent + off2) * inner + i];
              }
            }
          }
          off2 += e;
        }
      });
}

// Drops axis 0: picks row i of a rank >= 1 tensor.
template <typename T>
Tensor<T> slice_axis0(const Tensor<T>& x, std::size_t i) {
  if (x.rank() < 1) {
    raise(ErrorCode::dimension, "slice_axis0: scalar-shaped input");
  }
  const std::size_t d0 = x.dim(0);
  if (i >= d0) {
    raise(ErrorCode::dimension,
          "slice_axis0: index " + std::to_string(i) +
              " out of range for shape " + shape_str(x.shape()));
  }
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  if (out_shape.empty()) out_shape = {1};
  const std::size_t ny = shape_numel(out_shape);
  const auto& xv = x.data();
  std::vector<T> y(xv.begin() + static_cast<std::ptrdiff_t>(i * ny),
                   xv.begin() + static_cast<std::ptrdiff_t>((i + 1) * ny));
  return autodiff_detail::make_result<T>(
      std::move(out_shape), std::move(y), {x.handle()},
      [i, ny](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t j = 0; j < ny; ++j) {
          p.grad[i * ny + j] += self.grad[j];
        }
      });
}

// ---- matrix ops ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  autodiff_detail::require_rank("matmul", a, 2);
  autodiff_detail::require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    raise(ErrorCode::dimension, "matmul: inner dimensions differ, " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  }
  std::vector<T> y(m * n);
  kernels::gemm(false, false, m, n, k, a.data().data(), b.data().data(),
                y.data(), false);
  return autodiff_detail::make_result<T>(
      {m, n}, std::move(y), {a.handle(), b.handle()},
      [m, n, k](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          kernels::gemm(false, true, m, k, n, self.grad.data(),
                        pb.data.data(), pa.grad.data(), true);
        }
        if (pb.requires_grad) {
          kernels::gemm(true, false, k, n, m, pa.data.data(),
                        self.grad.data(), pb.grad.data(), true);
        }
      });
}

// Matrix product with a canonical per-element accumulation order: exact-zero
// products are skipped and the remaining addends are summed smallest value
// first. For operands that are sparse by exact zeros (masked attention, group
// mixing), jointly permuting rows and columns permutes the result bit-exactly,
// which index-ordered accumulation does not guarantee. The gradient is the
// ordinary matmul gradient.
template <typename T>
Tensor<T> matmul_sorted(const Tensor<T>& a, const Tensor<T>& b) {
  autodiff_detail::require_rank("matmul_sorted", a, 2);
  autodiff_detail::require_rank("matmul_sorted", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    raise(ErrorCode::dimension, "matmul_sorted: inner dimensions differ, " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  }
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> y(m * n);
  std::vector<T> terms;
  terms.reserve(k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      terms.clear();
      for (std::size_t l = 0; l < k; ++l) {
        const T p = av[i * k + l] * bv[l * n + j];
        if (p != T(0)) terms.push_back(p);
      }
      std::sort(terms.begin(), terms.end());
      T acc = T(0);
      for (T p : terms) acc += p;
      y[i * n + j] = acc;
    }
  }
  return autodiff_detail::make_result<T>(
      {m, n}, std::move(y), {a.handle(), b.handle()},
      [m, n, k](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          kernels::gemm(false, true, m, k, n, self.grad.data(),
                        pb.data.data(), pa.grad.data(), true);
        }
        if (pb.requires_grad) {
          kernels::gemm(true, false, k, n, m, pa.data.data(),
                        self.grad.data(), pb.grad.data(), true);
        }
      });
}

// y[..., l] = x[..., l] + bias[l] for every leading position.
template <typename T>
Tensor<T> broadcast_add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() < 1) {
    raise(ErrorCode::dimension, "broadcast_add_bias: scalar-shaped input");
  }
  autodiff_detail::require_rank("broadcast_add_bias", bias, 1);
  const std::size_t last = x.shape().back();
  if (last != bias.dim(0)) {
    raise(ErrorCode::dimension,
          "broadcast_add_bias: trailing dimension of " + shape_str(x.shape()) +
              " does not match bias " + shape_str(bias.shape()));
  }
  const auto& xv = x.data();
  const auto& bv = bias.data();
  std::vector<T> y(xv.size());
  const std::size_t rows = xv.size() / last;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t l = 0; l < last; ++l) {
      y[r * last + l] = xv[r * last + l] + bv[l];
    }
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle(), bias.handle()},
      [rows, last](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pb = *self.parents[1];
        if (px.requires_grad) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            px.grad[i] += self.grad[i];
          }
        }
        if (pb.requires_grad) {
          for (std::size_t l = 0; l < last; ++l) {
            T acc = T(0);
            for (std::size_t r = 0; r < rows; ++r) {
              acc += self.grad[r * last + l];
            }
            pb.grad[l] += acc;
          }
        }
      });
}

// ---- reductions ----

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  const auto& xv = x.data();
  T acc = T(0);
  for (T v : xv) acc += v;
  return autodiff_detail::make_result<T>(
      {1}, {acc}, {x.handle()}, [](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < p.grad.size(); ++i) {
          p.grad[i] += self.grad[0];
        }
      });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return affine(sum_all(x), T(1) / static_cast<T>(x.numel()), T(0));
}

namespace autodiff_detail {

template <typename T>
Tensor<T> reduce_axis(const char* op, const Tensor<T>& x, std::size_t axis,
                      bool mean) {
  require_rank(op, x, 2);
  if (axis > 1) {
    raise(ErrorCode::dimension, std::string(op) + ": axis " +
                                    std::to_string(axis) +
                                    " out of range for a rank-2 tensor");
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xv = x.data();
  const std::size_t out = axis == 0 ? n : m;
  const std::size_t red = axis == 0 ? m : n;
  std::vector<T> y(out, T(0));
  if (axis == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) y[j] += xv[i * n + j];
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += xv[i * n + j];
      y[i] = acc;
    }
  }
  const T scale = mean ? T(1) / static_cast<T>(red) : T(1);
  if (mean) {
    for (auto& v : y) v *= scale;
  }
  return make_result<T>(
      {out}, std::move(y), {x.handle()},
      [axis, m, n, scale](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] += scale * self.grad[axis == 0 ? j : i];
          }
        }
      });
}

}  // namespace autodiff_detail

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis) {
  return autodiff_detail::reduce_axis("sum_axis", x, axis, false);
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  return autodiff_detail::reduce_axis("mean_axis", x, axis, true);
}

// Max over one axis of a rank-2 tensor. Ties resolve to the lowest index and
// the gradient is routed to that element only.
template <typename T>
Tensor<T> max_axis(const Tensor<T>& x, std::size_t axis) {
  autodiff_detail::require_rank("max_axis", x, 2);
  if (axis > 1) {
    raise(ErrorCode::dimension,
          "max_axis: axis " + std::to_string(axis) +
              " out of range for a rank-2 tensor");
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0 || n == 0) {
    raise(ErrorCode::dimension,
          "max_axis: empty tensor " + shape_str(x.shape()));
  }
  const auto& xv = x.data();
  const std::size_t out = axis == 0 ? n : m;
  std::vector<T> y(out);
  std::vector<std::size_t> arg(out);
  if (axis == 0) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i) {
        if (xv[i * n + j] > xv[best * n + j]) best = i;
      }
      arg[j] = best;
      y[j] = xv[best * n + j];
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j) {
        if (xv[i * n + j] > xv[i * n + best]) best = j;
      }
      arg[i] = best;
      y[i] = xv[i * n + best];
    }
  }
  return autodiff_detail::make_result<T>(
      {out}, std::move(y), {x.handle()},
      [axis, n, arg](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t o = 0; o < arg.size(); ++o) {
          const std::size_t flat =
              axis == 0 ? arg[o] * n + o : o * n + arg[o];
          p.grad[flat] += self.grad[o];
        }
      });
}

// Column means of a rank-2 tensor, accumulated in sorted value order so the
// result is bit-identical under any permutation of the rows. Used by the
// temporal/global pooling stages, whose outputs must not depend on frame
// order.
template <typename T>
Tensor<T> mean_axis0_sorted(const Tensor<T>& x) {
  autodiff_detail::require_rank("mean_axis0_sorted", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0) {
    raise(ErrorCode::dimension, "mean_axis0_sorted: no rows to pool");
  }
  const auto& xv = x.data();
  std::vector<T> y(n);
  std::vector<T> column(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) column[i] = xv[i * n + j];
    std::sort(column.begin(), column.end());
    T acc = T(0);
    for (T v : column) acc += v;
    y[j] = acc / static_cast<T>(m);
  }
  return autodiff_detail::make_result<T>(
      {n}, std::move(y), {x.handle()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const T inv = T(1) / static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] += inv * self.grad[j];
          }
        }
      });
}

// ---- row-wise softmax family ----

namespace autodiff_detail {

template <typename T>
void require_softmax_input(const char* op, const Tensor<T>& x) {
  require_rank(op, x, 2);
  if (x.dim(1) == 0) {
    raise(ErrorCode::dimension,
          std::string(op) + ": rows are empty in shape " +
              shape_str(x.shape()));
  }
}

}  // namespace autodiff_detail

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  autodiff_detail::require_softmax_input("softmax_rows", x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    T mx = xv[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[i * n + j]);
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp(xv[i * n + j] - mx);
      s += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) {
            dot += self.grad[i * n + j] * self.data[i * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] +=
                self.data[i * n + j] * (self.grad[i * n + j] - dot);
          }
        }
      });
}

// Softmax over the entries of each row where mask is nonzero; masked-out
// entries are exactly zero in the output and receive zero gradient. The mask
// carries structure, not values, so no gradient flows into it. The
// denominator accumulates value-sorted so that permuting a row's unmasked
// set leaves its entries bit-identical.
template <typename T>
Tensor<T> masked_softmax_rows(const Tensor<T>& x, const Tensor<T>& mask) {
  autodiff_detail::require_softmax_input("masked_softmax_rows", x);
  autodiff_detail::require_same_shape("masked_softmax_rows", x, mask);
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xv = x.data();
  const auto& mv = mask.data();
  std::vector<T> y(xv.size(), T(0));
  std::vector<T> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    T mx = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      if (mv[i * n + j] != T(0)) {
        mx = any ? std::max(mx, xv[i * n + j]) : xv[i * n + j];
        any = true;
      }
    }
    if (!any) {
      raise(ErrorCode::dimension, "masked_softmax_rows: row " +
                                      std::to_string(i) +
                                      " has no unmasked entries");
    }
    terms.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (mv[i * n + j] != T(0)) {
        y[i * n + j] = std::exp(xv[i * n + j] - mx);
        terms.push_back(y[i * n + j]);
      }
    }
    std::sort(terms.begin(), terms.end());
    T s = T(0);
    for (T t : terms) s += t;
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) {
            dot += self.grad[i * n + j] * self.data[i * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] +=
                self.data[i * n + j] * (self.grad[i * n + j] - dot);
          }
        }
      });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
  autodiff_detail::require_softmax_input("log_softmax_rows", x);
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& xv = x.data();
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    T mx = xv[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[i * n + j]);
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += std::exp(xv[i * n + j] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] - lse;
  }
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
          T rowsum = T(0);
          for (std::size_t j = 0; j < n; ++j) rowsum += self.grad[i * n + j];
          for (std::size_t j = 0; j < n; ++j) {
            p.grad[i * n + j] += self.grad[i * n + j] -
                                 std::exp(self.data[i * n + j]) * rowsum;
          }
        }
      });
}

// ---- temporal convolution ----

// Depth-wise convolution along axis 0 of x[frames, joints, channels].
// kernel is [width] (shared across channels) or [channels, width].
template <typename T>
Tensor<T> conv1d_temporal(const Tensor<T>& x, const Tensor<T>& kernel,
                          kernels::Pad pad) {
  autodiff_detail::require_rank("conv1d_temporal", x, 3);
  const std::size_t frames = x.dim(0), joints = x.dim(1), channels = x.dim(2);
  std::size_t kchannels = 0, width = 0;
  if (kernel.rank() == 1) {
    kchannels = 1;
    width = kernel.dim(0);
  } else if (kernel.rank() == 2) {
    kchannels = kernel.dim(0);
    width = kernel.dim(1);
    if (kchannels != channels) {
      raise(ErrorCode::dimension,
            "conv1d_temporal: kernel " + shape_str(kernel.shape()) +
                " does not match " + std::to_string(channels) + " channels");
    }
  } else {
    raise(ErrorCode::dimension, "conv1d_temporal: kernel of shape " +
                                    shape_str(kernel.shape()) +
                                    " must have rank 1 or 2");
  }
  if (width % 2 == 0 || width == 0) {
    raise(ErrorCode::dimension, "conv1d_temporal: width " +
                                    std::to_string(width) + " must be odd");
  }
  if (frames == 0) {
    raise(ErrorCode::dimension, "conv1d_temporal: no frames");
  }
  std::vector<T> y(x.numel());
  kernels::conv1d(x.data().data(), y.data(), frames, joints, channels,
                  kernel.data().data(), kchannels, width, pad);
  return autodiff_detail::make_result<T>(
      x.shape(), std::move(y), {x.handle(), kernel.handle()},
      [frames, joints, channels, kchannels, width, pad](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        if (px.requires_grad) {
          kernels::conv1d_grad_input(self.grad.data(), px.grad.data(), frames,
                                     joints, channels, pk.data.data(),
                                     kchannels, width, pad);
        }
        if (pk.requires_grad) {
          kernels::conv1d_grad_kernel(self.grad.data(), px.data.data(),
                                      pk.grad.data(), frames, joints, channels,
                                      kchannels, width, pad);
        }
      });
}

// ---- indexed construction ----

// Builds a dense [rows, cols] matrix with values[i] added at
// (row_index[i], col_index[i]). Duplicate coordinates accumulate.
template <typename T>
Tensor<T> scatter_to_dense(const Tensor<T>& values,
                           std::vector<std::size_t> row_index,
                           std::vector<std::size_t> col_index,
                           std::size_t rows, std::size_t cols) {
  autodiff_detail::require_rank("scatter_to_dense", values, 1);
  const std::size_t m = values.dim(0);
  if (row_index.size() != m || col_index.size() != m) {
    raise(ErrorCode::dimension,
          "scatter_to_dense: " + std::to_string(m) + " values but " +
              std::to_string(row_index.size()) + "/" +
              std::to_string(col_index.size()) + " indices");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (row_index[i] >= rows || col_index[i] >= cols) {
      raise(ErrorCode::dimension,
            "scatter_to_dense: index (" + std::to_string(row_index[i]) + ", " +
                std::to_string(col_index[i]) + ") outside " +
                std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::vector<T> y(rows * cols, T(0));
  const auto& vv = values.data();
  for (std::size_t i = 0; i < m; ++i) {
    y[row_index[i] * cols + col_index[i]] += vv[i];
  }
  return autodiff_detail::make_result<T>(
      {rows, cols}, std::move(y), {values.handle()},
      [row_index = std::move(row_index), col_index = std::move(col_index),
       cols](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < p.grad.size(); ++i) {
          p.grad[i] += self.grad[row_index[i] * cols + col_index[i]];
        }
      });
}

// y[i] = x[index[i]] for rank-1 x. Indices may repeat; gradients of repeated
// reads accumulate onto the shared entry.
template <typename T>
Tensor<T> gather_values(const Tensor<T>& x, std::vector<std::size_t> index) {
  autodiff_detail::require_rank("gather_values", x, 1);
  const std::size_t n = x.dim(0);
  for (std::size_t i : index) {
    if (i >= n) {
      raise(ErrorCode::dimension, "gather_values: index " + std::to_string(i) +
                                      " out of range for " + std::to_string(n) +
                                      " values");
    }
  }
  const auto& xv = x.data();
  const std::size_t m = index.size();
  std::vector<T> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = xv[index[i]];
  return autodiff_detail::make_result<T>(
      {m}, std::move(y), {x.handle()},
      [index = std::move(index)](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < index.size(); ++i) {
          p.grad[index[i]] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  return concat(std::vector<Tensor<T>>(parts), axis);
}

// Stacks rank-1 tensors of equal length into a [n, c] matrix.
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) {
    raise(ErrorCode::dimension, "stack_rows: no tensors given");
  }
  std::vector<Tensor<T>> reshaped;
  reshaped.reserve(rows.size());
  for (const auto& r : rows) {
    autodiff_detail::require_rank("stack_rows", r, 1);
    reshaped.push_back(reshape(r, {1, r.dim(0)}));
  }
  return concat(reshaped, 0);
}

template <typename T>
Tensor<T> stack_rows(std::initializer_list<Tensor<T>> rows) {
  return stack_rows(std::vector<Tensor<T>>(rows));
}

}  // namespace asgl
