#pragma once

#include <cstddef>

namespace asgl::kernels {

// Every kernel ships in two versions: a deliberately naive serial reference
// and an OpenMP one. Both assign each output element to exactly one thread
// and accumulate partial sums in the same index order, so their results are
// bit-identical for any thread count. Tests assert that equivalence; the
// dispatching wrappers below pick the OpenMP version for large problems when
// parallelism is enabled.

bool parallel_enabled();
void set_parallel(bool on);

// Minimum number of multiply-adds before the parallel version is used.
std::size_t parallel_grain();
void set_parallel_grain(std::size_t grain);

int max_threads();
void set_threads(int n);  // no-op when OpenMP is unavailable

enum class Pad { zero, circular };

// c[m,n] (+)= op(a) * op(b) with op(a)[m,k], op(b)[k,n], all row-major.
// trans_a reads a as a k-by-m buffer, trans_b reads b as n-by-k.
template <typename T>
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void gemm_omp(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
              std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate);

// Depth-wise convolution along the frame axis of x[frames, joints, channels].
// kernel is [channels, width] when kchannels == channels or a single shared
// [width] row when kchannels == 1. width must be odd; the window is centred.
template <typename T>
void conv1d_serial(const T* x, T* y, std::size_t frames, std::size_t joints,
                   std::size_t channels, const T* kernel, std::size_t kchannels,
                   std::size_t width, Pad pad);

template <typename T>
void conv1d_omp(const T* x, T* y, std::size_t frames, std::size_t joints,
                std::size_t channels, const T* kernel, std::size_t kchannels,
                std::size_t width, Pad pad);

template <typename T>
void conv1d(const T* x, T* y, std::size_t frames, std::size_t joints,
            std::size_t channels, const T* kernel, std::size_t kchannels,
            std::size_t width, Pad pad);

// grad wrt x: gx += conv-transpose of gy. Accumulates into gx.
template <typename T>
void conv1d_grad_input_serial(const T* gy, T* gx, std::size_t frames,
                              std::size_t joints, std::size_t channels,
                              const T* kernel, std::size_t kchannels,
                              std::size_t width, Pad pad);

template <typename T>
void conv1d_grad_input_omp(const T* gy, T* gx, std::size_t frames,
                           std::size_t joints, std::size_t channels,
                           const T* kernel, std::size_t kchannels,
                           std::size_t width, Pad pad);

template <typename T>
void conv1d_grad_input(const T* gy, T* gx, std::size_t frames,
                       std::size_t joints, std::size_t channels,
                       const T* kernel, std::size_t kchannels,
                       std::size_t width, Pad pad);

// grad wrt kernel. Accumulates into gk (layout matches the kernel argument).
template <typename T>
void conv1d_grad_kernel_serial(const T* gy, const T* x, T* gk,
                               std::size_t frames, std::size_t joints,
                               std::size_t channels, std::size_t kchannels,
                               std::size_t width, Pad pad);

template <typename T>
void conv1d_grad_kernel_omp(const T* gy, const T* x, T* gk, std::size_t frames,
                            std::size_t joints, std::size_t channels,
                            std::size_t kchannels, std::size_t width, Pad pad);

template <typename T>
void conv1d_grad_kernel(const T* gy, const T* x, T* gk, std::size_t frames,
                        std::size_t joints, std::size_t channels,
                        std::size_t kchannels, std::size_t width, Pad pad);

// dist[i,j] = 1 - cosine(q_i, g_j). A zero-norm vector has similarity 0 with
// everything, hence distance 1.
template <typename T>
void cosine_distance_serial(const T* q, std::size_t nq, const T* g,
                            std::size_t ng, std::size_t dim, T* dist);

template <typename T>
void cosine_distance_omp(const T* q, std::size_t nq, const T* g,
                         std::size_t ng, std::size_t dim, T* dist);

template <typename T>
void cosine_distance(const T* q, std::size_t nq, const T* g, std::size_t ng,
                     std::size_t dim, T* dist);

}  // namespace asgl::kernels
