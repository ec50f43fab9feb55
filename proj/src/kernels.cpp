#include "asgl/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstddef>

#ifdef ASGL_HAVE_OPENMP
#include <omp.h>
#endif

namespace asgl::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<std::size_t> g_grain{1u << 15};
}  // namespace

bool parallel_enabled() { return g_parallel.load(); }
void set_parallel(bool on) { g_parallel.store(on); }
std::size_t parallel_grain() { return g_grain.load(); }
void set_parallel_grain(std::size_t grain) { g_grain.store(grain); }

int max_threads() {
#ifdef ASGL_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef ASGL_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace {

template <typename T>
inline T load_a(const T* a, bool trans_a, std::size_t m, std::size_t k,
                std::size_t i, std::size_t l) {
  return trans_a ? a[l * m + i] : a[i * k + l];
}

template <typename T>
inline T load_b(const T* b, bool trans_b, std::size_t k, std::size_t n,
                std::size_t l, std::size_t j) {
  return trans_b ? b[j * k + l] : b[l * n + j];
}

// Frame index for a window tap, or frames (= "outside") for zero padding.
inline std::size_t tap_frame(std::ptrdiff_t t, std::size_t frames, Pad pad) {
  if (pad == Pad::circular) {
    std::ptrdiff_t f = t % static_cast<std::ptrdiff_t>(frames);
    if (f < 0) f += static_cast<std::ptrdiff_t>(frames);
    return static_cast<std::size_t>(f);
  }
  if (t < 0 || t >= static_cast<std::ptrdiff_t>(frames)) return frames;
  return static_cast<std::size_t>(t);
}

}  // namespace

template <typename T>
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t l = 0; l < k; ++l) {
        acc += load_a(a, trans_a, m, k, i, l) * load_b(b, trans_b, k, n, l, j);
      }
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_omp(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
              std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  // Row-parallel. For the common no-transpose-b case the inner loops run in
  // (l, j) order for locality; per output element the additions still happen
  // in ascending l, the same order as the serial reference.
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ip = 0; ip < rows; ++ip) {
    const std::size_t i = static_cast<std::size_t>(ip);
    T* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    if (!trans_b) {
      for (std::size_t l = 0; l < k; ++l) {
        const T av = load_a(a, trans_a, m, k, i, l);
        const T* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        T acc = crow[j];
        const T* brow = b + j * k;
        for (std::size_t l = 0; l < k; ++l) {
          acc += load_a(a, trans_a, m, k, i, l) * brow[l];
        }
        crow[j] = acc;
      }
    }
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const std::size_t work = m * n * k;
  if (parallel_enabled() && work >= parallel_grain() && max_threads() > 1) {
    gemm_omp(trans_a, trans_b, m, n, k, a, b, c, accumulate);
  } else {
    gemm_serial(trans_a, trans_b, m, n, k, a, b, c, accumulate);
  }
}

template <typename T>
void conv1d_serial(const T* x, T* y, std::size_t frames, std::size_t joints,
                   std::size_t channels, const T* kernel, std::size_t kchannels,
                   std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  const std::size_t fstride = joints * channels;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      for (std::size_t c = 0; c < channels; ++c) {
        const T* krow = kernel + (kchannels == 1 ? 0 : c * width);
        T acc = T(0);
        for (std::size_t u = 0; u < width; ++u) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + u) -
                                     static_cast<std::ptrdiff_t>(offset);
          const std::size_t f = tap_frame(src, frames, pad);
          if (f < frames) acc += krow[u] * x[f * fstride + j * channels + c];
        }
        y[t * fstride + j * channels + c] = acc;
      }
    }
  }
}

template <typename T>
void conv1d_omp(const T* x, T* y, std::size_t frames, std::size_t joints,
                std::size_t channels, const T* kernel, std::size_t kchannels,
                std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  const std::size_t fstride = joints * channels;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(frames * joints);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t tj = 0; tj < total; ++tj) {
    const std::size_t t = static_cast<std::size_t>(tj) / joints;
    const std::size_t j = static_cast<std::size_t>(tj) % joints;
    for (std::size_t c = 0; c < channels; ++c) {
      const T* krow = kernel + (kchannels == 1 ? 0 : c * width);
      T acc = T(0);
      for (std::size_t u = 0; u < width; ++u) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + u) -
                                   static_cast<std::ptrdiff_t>(offset);
        const std::size_t f = tap_frame(src, frames, pad);
        if (f < frames) acc += krow[u] * x[f * fstride + j * channels + c];
      }
      y[t * fstride + j * channels + c] = acc;
    }
  }
}

template <typename T>
void conv1d(const T* x, T* y, std::size_t frames, std::size_t joints,
            std::size_t channels, const T* kernel, std::size_t kchannels,
            std::size_t width, Pad pad) {
  const std::size_t work = frames * joints * channels * width;
  if (parallel_enabled() && work >= parallel_grain() && max_threads() > 1) {
    conv1d_omp(x, y, frames, joints, channels, kernel, kchannels, width, pad);
  } else {
    conv1d_serial(x, y, frames, joints, channels, kernel, kchannels, width,
                  pad);
  }
}

namespace {

// gx[t'] += sum_u kernel[u] * gy[t' + offset - u]; derived from y's forward
// window so that zero padding drops out-of-range terms and circular wraps.
template <typename T>
inline T grad_input_at(const T* gy, std::size_t frames, std::size_t fstride,
                       std::size_t jc, const T* krow, std::size_t width,
                       std::size_t offset, std::size_t tp, Pad pad) {
  T acc = T(0);
  for (std::size_t u = 0; u < width; ++u) {
    const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(tp + offset) -
                             static_cast<std::ptrdiff_t>(u);
    const std::size_t f = tap_frame(t, frames, pad);
    if (f < frames) acc += krow[u] * gy[f * fstride + jc];
  }
  return acc;
}

}  // namespace

template <typename T>
void conv1d_grad_input_serial(const T* gy, T* gx, std::size_t frames,
                              std::size_t joints, std::size_t channels,
                              const T* kernel, std::size_t kchannels,
                              std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  const std::size_t fstride = joints * channels;
  for (std::size_t tp = 0; tp < frames; ++tp) {
    for (std::size_t j = 0; j < joints; ++j) {
      for (std::size_t c = 0; c < channels; ++c) {
        const T* krow = kernel + (kchannels == 1 ? 0 : c * width);
        gx[tp * fstride + j * channels + c] += grad_input_at(
            gy, frames, fstride, j * channels + c, krow, width, offset, tp,
            pad);
      }
    }
  }
}

template <typename T>
void conv1d_grad_input_omp(const T* gy, T* gx, std::size_t frames,
                           std::size_t joints, std::size_t channels,
                           const T* kernel, std::size_t kchannels,
                           std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  const std::size_t fstride = joints * channels;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(frames * joints);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t tj = 0; tj < total; ++tj) {
    const std::size_t tp = static_cast<std::size_t>(tj) / joints;
    const std::size_t j = static_cast<std::size_t>(tj) % joints;
    for (std::size_t c = 0; c < channels; ++c) {
      const T* krow = kernel + (kchannels == 1 ? 0 : c * width);
      gx[tp * fstride + j * channels + c] += grad_input_at(
          gy, frames, fstride, j * channels + c, krow, width, offset, tp, pad);
    }
  }
}

template <typename T>
void conv1d_grad_input(const T* gy, T* gx, std::size_t frames,
                       std::size_t joints, std::size_t channels,
                       const T* kernel, std::size_t kchannels,
                       std::size_t width, Pad pad) {
  const std::size_t work = frames * joints * channels * width;
  if (parallel_enabled() && work >= parallel_grain() && max_threads() > 1) {
    conv1d_grad_input_omp(gy, gx, frames, joints, channels, kernel, kchannels,
                          width, pad);
  } else {
    conv1d_grad_input_serial(gy, gx, frames, joints, channels, kernel,
                             kchannels, width, pad);
  }
}

namespace {

// Accumulation order over (t, j) is fixed; each (c, u) or (u) output cell is
// owned by one thread in the parallel version.
template <typename T>
inline T grad_kernel_cell(const T* gy, const T* x, std::size_t frames,
                          std::size_t joints, std::size_t channels,
                          std::size_t offset, std::size_t c, std::size_t u,
                          Pad pad) {
  const std::size_t fstride = joints * channels;
  T acc = T(0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + u) -
                               static_cast<std::ptrdiff_t>(offset);
    const std::size_t f = tap_frame(src, frames, pad);
    if (f >= frames) continue;
    for (std::size_t j = 0; j < joints; ++j) {
      acc += gy[t * fstride + j * channels + c] *
             x[f * fstride + j * channels + c];
    }
  }
  return acc;
}

}  // namespace

template <typename T>
void conv1d_grad_kernel_serial(const T* gy, const T* x, T* gk,
                               std::size_t frames, std::size_t joints,
                               std::size_t channels, std::size_t kchannels,
                               std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  if (kchannels == 1) {
    for (std::size_t u = 0; u < width; ++u) {
      T acc = T(0);
      for (std::size_t c = 0; c < channels; ++c) {
        acc += grad_kernel_cell(gy, x, frames, joints, channels, offset,
                                c, u, pad);
      }
      gk[u] += acc;
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t u = 0; u < width; ++u) {
        gk[c * width + u] += grad_kernel_cell(gy, x, frames, joints, channels,
                                              offset, c, u, pad);
      }
    }
  }
}

template <typename T>
void conv1d_grad_kernel_omp(const T* gy, const T* x, T* gk, std::size_t frames,
                            std::size_t joints, std::size_t channels,
                            std::size_t kchannels, std::size_t width, Pad pad) {
  const std::size_t offset = (width - 1) / 2;
  if (kchannels == 1) {
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(width);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t up = 0; up < w; ++up) {
      const std::size_t u = static_cast<std::size_t>(up);
      T acc = T(0);
      for (std::size_t c = 0; c < channels; ++c) {
        acc += grad_kernel_cell(gy, x, frames, joints, channels, offset,
                                c, u, pad);
      }
      gk[u] += acc;
    }
  } else {
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(channels * width);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t cu = 0; cu < total; ++cu) {
      const std::size_t c = static_cast<std::size_t>(cu) / width;
      const std::size_t u = static_cast<std::size_t>(cu) % width;
      gk[c * width + u] += grad_kernel_cell(gy, x, frames, joints, channels,
                                            offset, c, u, pad);
    }
  }
}

template <typename T>
void conv1d_grad_kernel(const T* gy, const T* x, T* gk, std::size_t frames,
                        std::size_t joints, std::size_t channels,
                        std::size_t kchannels, std::size_t width, Pad pad) {
  const std::size_t work = frames * joints * channels * width;
  if (parallel_enabled() && work >= parallel_grain() && max_threads() > 1) {
    conv1d_grad_kernel_omp(gy, x, gk, frames, joints, channels, kchannels,
                           width, pad);
  } else {
    conv1d_grad_kernel_serial(gy, x, gk, frames, joints, channels, kchannels,
                              width, pad);
  }
}

namespace {

template <typename T>
inline T cosine_distance_cell(const T* qi, const T* gj, std::size_t dim) {
  T dot = T(0), nq = T(0), ng = T(0);
  for (std::size_t d = 0; d < dim; ++d) {
    dot += qi[d] * gj[d];
    nq += qi[d] * qi[d];
    ng += gj[d] * gj[d];
  }
  if (nq == T(0) || ng == T(0)) return T(1);
  return T(1) - dot / (std::sqrt(nq) * std::sqrt(ng));
}

}  // namespace

template <typename T>
void cosine_distance_serial(const T* q, std::size_t nq, const T* g,
                            std::size_t ng, std::size_t dim, T* dist) {
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      dist[i * ng + j] = cosine_distance_cell(q + i * dim, g + j * dim, dim);
    }
  }
}

template <typename T>
void cosine_distance_omp(const T* q, std::size_t nq, const T* g,
                         std::size_t ng, std::size_t dim, T* dist) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(nq);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ip = 0; ip < rows; ++ip) {
    const std::size_t i = static_cast<std::size_t>(ip);
    for (std::size_t j = 0; j < ng; ++j) {
      dist[i * ng + j] = cosine_distance_cell(q + i * dim, g + j * dim, dim);
    }
  }
}

template <typename T>
void cosine_distance(const T* q, std::size_t nq, const T* g, std::size_t ng,
                     std::size_t dim, T* dist) {
  const std::size_t work = nq * ng * dim;
  if (parallel_enabled() && work >= parallel_grain() && max_threads() > 1) {
    cosine_distance_omp(q, nq, g, ng, dim, dist);
  } else {
    cosine_distance_serial(q, nq, g, ng, dim, dist);
  }
}

#define ASGL_INSTANTIATE(T)                                                    \
  template void gemm_serial<T>(bool, bool, std::size_t, std::size_t,          \
                               std::size_t, const T*, const T*, T*, bool);    \
  template void gemm_omp<T>(bool, bool, std::size_t, std::size_t,             \
                            std::size_t, const T*, const T*, T*, bool);       \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t,    \
                        const T*, const T*, T*, bool);                        \
  template void conv1d_serial<T>(const T*, T*, std::size_t, std::size_t,      \
                                 std::size_t, const T*, std::size_t,          \
                                 std::size_t, Pad);                           \
  template void conv1d_omp<T>(const T*, T*, std::size_t, std::size_t,         \
                              std::size_t, const T*, std::size_t,             \
                              std::size_t, Pad);                              \
  template void conv1d<T>(const T*, T*, std::size_t, std::size_t,             \
                          std::size_t, const T*, std::size_t, std::size_t,    \
                          Pad);                                               \
  template void conv1d_grad_input_serial<T>(const T*, T*, std::size_t,        \
                                            std::size_t, std::size_t,         \
                                            const T*, std::size_t,            \
                                            std::size_t, Pad);                \
  template void conv1d_grad_input_omp<T>(const T*, T*, std::size_t,           \
                                         std::size_t, std::size_t, const T*,  \
                                         std::size_t, std::size_t, Pad);      \
  template void conv1d_grad_input<T>(const T*, T*, std::size_t, std::size_t,  \
                                     std::size_t, const T*, std::size_t,      \
                                     std::size_t, Pad);                       \
  template void conv1d_grad_kernel_serial<T>(const T*, const T*, T*,          \
                                             std::size_t, std::size_t,        \
                                             std::size_t, std::size_t,        \
                                             std::size_t, Pad);               \
  template void conv1d_grad_kernel_omp<T>(const T*, const T*, T*,             \
                                          std::size_t, std::size_t,           \
                                          std::size_t, std::size_t,           \
                                          std::size_t, Pad);                  \
  template void conv1d_grad_kernel<T>(const T*, const T*, T*, std::size_t,    \
                                      std::size_t, std::size_t, std::size_t,  \
                                      std::size_t, Pad);                      \
  template void cosine_distance_serial<T>(const T*, std::size_t, const T*,    \
                                          std::size_t, std::size_t, T*);      \
  template void cosine_distance_omp<T>(const T*, std::size_t, const T*,       \
                                       std::size_t, std::size_t, T*);         \
  template void cosine_distance<T>(const T*, std::size_t, const T*,           \
                                   std::size_t, std::size_t, T*);

ASGL_INSTANTIATE(float)
ASGL_INSTANTIATE(double)
#undef ASGL_INSTANTIATE

}  // namespace asgl::kernels
