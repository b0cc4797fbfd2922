#pragma once

#include <cstdint>
#include <vector>

namespace cpsaa {

// Fraction width of the block fixed-point format: fractions are int32 values
// scaled by 2^(exponent - kFracBits), top-aligned so the largest magnitude of
// a matrix sits in [2^30, 2^31).
constexpr int kFracBits = 31;

// ---- matrix containers --------------------------------------------------

// Row-major double matrix. Used at module boundaries, in oracles, and as
// the interchange type between the numeric pipeline and the test suite.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Row-major integer matrix. Holds quantized values and products of
// quantized values, so entries are kept at 64 bits.
struct IntMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int64_t> data;

  IntMatrix() = default;
  IntMatrix(int r, int c, int64_t fill = 0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  int64_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  int64_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Block fixed-point matrix: value(r,c) = frac(r,c) * 2^(exponent - 31).
// One exponent is shared by the whole matrix and fractions are top-aligned:
// for a nonzero matrix the largest |frac| lies in [2^30, 2^31).
struct FixedPointMatrix {
  int rows = 0;
  int cols = 0;
  int exponent = 0;
  std::vector<int32_t> frac;

  FixedPointMatrix() = default;
  FixedPointMatrix(int r, int c)
      : rows(r), cols(c), frac(static_cast<size_t>(r) * c, 0) {}

  int32_t& at(int r, int c) { return frac[static_cast<size_t>(r) * cols + c]; }
  int32_t at(int r, int c) const { return frac[static_cast<size_t>(r) * cols + c]; }
  double value_at(int r, int c) const;
};

// ---- quantization parameters --------------------------------------------

// Parameters of the low-precision approximation path.
struct QuantConfig {
  double gamma = 1.0;  // quantization scale, Q(x) = round(gamma * x)
  int bits = 4;        // signed width of quantized values
  double theta = 0.5;  // binarization threshold on softmax scores, (0, 1]
  int d = 64;          // attention head dimension (scores divide by sqrt(d))

  void validate() const;  // throws std::invalid_argument on bad fields
};

// ---- conversions ---------------------------------------------------------

// Chooses the shared exponent from the largest magnitude and rounds every
// entry to a top-aligned 32-bit fraction. An all-zero matrix gets exponent 0.
FixedPointMatrix extract_exponent(const RealMatrix& m);

RealMatrix to_real(const FixedPointMatrix& m);

// ---- fixed-point arithmetic ----------------------------------------------

// C = A * B. Each 64-bit product is rounded back to 31 fraction bits before
// accumulation (half away from zero), then the result is renormalized to a
// top-aligned fraction. Throws std::invalid_argument on shape mismatch.
FixedPointMatrix fp_matmul(const FixedPointMatrix& a, const FixedPointMatrix& b);

FixedPointMatrix fp_transpose(const FixedPointMatrix& m);

// Row-wise softmax. Exponentials are taken on the reconstructed real values;
// each row sums to 1 within 2^-20.
FixedPointMatrix softmax_rows(const FixedPointMatrix& m);

// ---- quantized path ------------------------------------------------------

// Q(x) = round(gamma * x), saturated to the signed `bits` range.
IntMatrix quantize(const FixedPointMatrix& m, const QuantConfig& q);

// Inverse scaling of a product of `power` quantized factors: x = v / gamma^power.
// Throws std::invalid_argument when power < 1.
FixedPointMatrix dequantize(const IntMatrix& m, const QuantConfig& q, int power = 1);

// C = A * B over integers (exact).
IntMatrix int_matmul(const IntMatrix& a, const IntMatrix& b);

IntMatrix int_transpose(const IntMatrix& m);

// ---- reference attention --------------------------------------------------

// Dense attention in the fixed-point domain: softmax((X Wq)(X Wk)^T / sqrt(d)) (X Wv).
FixedPointMatrix dense_attention_oracle(const FixedPointMatrix& x,
                                        const FixedPointMatrix& wq,
                                        const FixedPointMatrix& wk,
                                        const FixedPointMatrix& wv, int d);

// Rounds v >> k half away from zero.
int64_t round_shift(int64_t v, int k);

// Renormalizes accumulator sums of 31-fraction-bit products (carrying raw
// exponent `raw_exponent`) into a top-aligned matrix. Kernels that build dot
// products entry by entry share this with fp_matmul, so equal sums give
// bit-identical results.
FixedPointMatrix fp_from_acc(const std::vector<int64_t>& acc, int rows, int cols,
                             int raw_exponent);

}  // namespace cpsaa
