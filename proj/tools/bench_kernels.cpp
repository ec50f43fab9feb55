#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asgl/kernels.hpp"
#include "asgl/rng.hpp"

namespace {

using asgl::kernels::Pad;

std::vector<double> random_vec(std::size_t n, asgl::Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(
        best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

bool report(const std::string& name, double serial_ms, double omp_ms,
            const std::vector<double>& serial_out,
            const std::vector<double>& omp_out) {
  const bool match = serial_out == omp_out;
  std::printf("%-24s %10.3f ms %10.3f ms %7.2fx  %s\n", name.c_str(),
              serial_ms, omp_ms, serial_ms / omp_ms,
              match ? "bit-identical" : "MISMATCH");
  return match;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Compares the serial reference kernels against the OpenMP versions. "
      "The two must produce bit-identical outputs; any mismatch fails."};
  int reps = 5;
  int threads = 0;
  app.add_option("--reps", reps, "timing repetitions, best run wins");
  app.add_option("--threads", threads, "OpenMP thread count (0 keeps the default)");
  CLI11_PARSE(app, argc, argv);

  if (threads > 0) asgl::kernels::set_threads(threads);
  std::printf("threads: %d\n", asgl::kernels::max_threads());
  std::printf("%-24s %13s %13s %8s\n", "kernel", "serial", "openmp",
              "speedup");

  asgl::Rng rng(7);
  bool all_match = true;

  {
    const std::size_t m = 192, n = 192, k = 192;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> cs(m * n), co(m * n);
    const double ts = best_ms(reps, [&] {
      asgl::kernels::gemm_serial(false, false, m, n, k, a.data(), b.data(),
                                 cs.data(), false);
    });
    const double to = best_ms(reps, [&] {
      asgl::kernels::gemm_omp(false, false, m, n, k, a.data(), b.data(),
                              co.data(), false);
    });
    all_match &= report("gemm 192^3", ts, to, cs, co);
  }

  {
    const std::size_t frames = 256, joints = 14, channels = 128, width = 3;
    const auto x = random_vec(frames * joints * channels, rng);
    const auto kern = random_vec(channels * width, rng);
    std::vector<double> ys(x.size()), yo(x.size());
    const double ts = best_ms(reps, [&] {
      asgl::kernels::conv1d_serial(x.data(), ys.data(), frames, joints,
                                   channels, kern.data(), channels, width,
                                   Pad::zero);
    });
    const double to = best_ms(reps, [&] {
      asgl::kernels::conv1d_omp(x.data(), yo.data(), frames, joints, channels,
                                kern.data(), channels, width, Pad::zero);
    });
    all_match &= report("conv1d 256x14x128", ts, to, ys, yo);

    const auto gy = random_vec(x.size(), rng);
    std::vector<double> gxs(x.size()), gxo(x.size());
    const double tgs = best_ms(reps, [&] {
      std::fill(gxs.begin(), gxs.end(), 0.0);
      asgl::kernels::conv1d_grad_input_serial(gy.data(), gxs.data(), frames,
                                              joints, channels, kern.data(),
                                              channels, width, Pad::zero);
    });
    const double tgo = best_ms(reps, [&] {
      std::fill(gxo.begin(), gxo.end(), 0.0);
      asgl::kernels::conv1d_grad_input_omp(gy.data(), gxo.data(), frames,
                                           joints, channels, kern.data(),
                                           channels, width, Pad::zero);
    });
    all_match &= report("conv1d grad-input", tgs, tgo, gxs, gxo);

    std::vector<double> gks(kern.size()), gko(kern.size());
    const double tks = best_ms(reps, [&] {
      std::fill(gks.begin(), gks.end(), 0.0);
      asgl::kernels::conv1d_grad_kernel_serial(gy.data(), x.data(),
                                               gks.data(), frames, joints,
                                               channels, channels, width,
                                               Pad::zero);
    });
    const double tko = best_ms(reps, [&] {
      std::fill(gko.begin(), gko.end(), 0.0);
      asgl::kernels::conv1d_grad_kernel_omp(gy.data(), x.data(), gko.data(),
                                            frames, joints, channels,
                                            channels, width, Pad::zero);
    });
    all_match &= report("conv1d grad-kernel", tks, tko, gks, gko);
  }

  {
    const std::size_t nq = 256, ng = 1024, dim = 256;
    const auto q = random_vec(nq * dim, rng);
    const auto g = random_vec(ng * dim, rng);
    std::vector<double> ds(nq * ng), dp(nq * ng);
    const double ts = best_ms(reps, [&] {
      asgl::kernels::cosine_distance_serial(q.data(), nq, g.data(), ng, dim,
                                            ds.data());
    });
    const double to = best_ms(reps, [&] {
      asgl::kernels::cosine_distance_omp(q.data(), nq, g.data(), ng, dim,
                                         dp.data());
    });
    all_match &= report("cosine 256x1024x256", ts, to, ds, dp);
  }

  if (!all_match) {
    std::fprintf(stderr,
                 "serial and OpenMP kernels disagree; see MISMATCH rows\n");
    return 1;
  }
  return 0;
}
