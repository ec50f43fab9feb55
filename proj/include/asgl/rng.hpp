#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "asgl/error.hpp"

namespace asgl {

// Deterministic random source. All draw paths are written out by hand instead
// of going through std:: distributions, whose output is implementation
// defined; identical seeds must give identical streams on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Rejects the biased tail of the 64-bit range.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) raise(ErrorCode::config, "Rng::below: bound must be positive");
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    std::uint64_t v = engine_();
    while (v < threshold) v = engine_();
    return v % n;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  // Standard normal via Box-Muller; one engine draw pair per call.
  double normal() {
    const double u1 = 1.0 - uniform01();  // keep away from log(0)
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Fisher-Yates, descending index order.
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

  // Child stream decorrelated from the parent's continuation.
  Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ull); }

  // mt19937_64 stream I/O is specified by the standard, so state strings are
  // portable across implementations.
  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) raise(ErrorCode::data, "Rng::set_state: unparsable engine state");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace asgl
