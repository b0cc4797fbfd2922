#pragma once

#include <cmath>
#include <cstdint>

#include "cpsaa/fixed_point.hpp"

namespace testutil {

// Deterministic generator for test fixtures (splitmix64).
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [-1, 1).
  double next_signed_unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 4503599627370496.0) * 2.0 - 1.0;
  }

  double next_unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }
};

inline cpsaa::RealMatrix random_real(int rows, int cols, uint64_t seed, double scale = 1.0) {
  cpsaa::RealMatrix m(rows, cols);
  Rng rng(seed);
  for (double& v : m.data) v = rng.next_signed_unit() * scale;
  return m;
}

// Plain triple-loop double-precision product, the numeric reference.
inline cpsaa::RealMatrix real_matmul(const cpsaa::RealMatrix& a, const cpsaa::RealMatrix& b) {
  cpsaa::RealMatrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; i++)
    for (int j = 0; j < b.cols; j++) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; k++) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

inline double max_abs(const cpsaa::RealMatrix& m) {
  double mx = 0.0;
  for (double v : m.data) mx = std::max(mx, std::fabs(v));
  return mx;
}

inline double max_abs_diff(const cpsaa::RealMatrix& a, const cpsaa::RealMatrix& b) {
  double mx = 0.0;
  for (size_t i = 0; i < a.data.size(); i++) mx = std::max(mx, std::fabs(a.data[i] - b.data[i]));
  return mx;
}

}  // namespace testutil
