#include "cpsaa/fixed_point.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace cpsaa {

namespace {



// Smallest e with |v| < 2^e for all entries; 0 for an all-zero matrix.
int top_exponent(const RealMatrix& m) {
  double maxabs = 0.0;
  for (double v : m.data) maxabs = std::max(maxabs, std::fabs(v));
  if (maxabs == 0.0) return 0;
  int e = std::ilogb(maxabs) + 1;          // 2^(e-1) <= maxabs < 2^e
  if (maxabs >= std::ldexp(1.0, e)) e++;   // guard ilogb edge cases
  return e;
}

}  // namespace

double FixedPointMatrix::value_at(int r, int c) const {
  return std::ldexp(static_cast<double>(at(r, c)), exponent - kFracBits);
}

void QuantConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("quant: gamma must be > 0");
  if (bits < 2 || bits > 16) throw std::invalid_argument("quant: bits must be in [2,16]");
  if (!(theta > 0.0) || theta > 1.0) throw std::invalid_argument("quant: theta must be in (0,1]");
  if (d < 1) throw std::invalid_argument("quant: d must be >= 1");
}

int64_t round_shift(int64_t v, int k) {
  if (k <= 0) return v << -k;
  const int64_t half = int64_t{1} << (k - 1);
  if (v >= 0) return (v + half) >> k;
  return -((-v + half) >> k);
}

FixedPointMatrix extract_exponent(const RealMatrix& m) {
  FixedPointMatrix out(m.rows, m.cols);
  int e = top_exponent(m);
  for (;;) {
    bool bumped = false;
    for (size_t i = 0; i < m.data.size(); i++) {
      double scaled = std::ldexp(m.data[i], kFracBits - e);
      int64_t f = std::llround(scaled);
      if (f >= (int64_t{1} << kFracBits) || f < -(int64_t{1} << kFracBits)) {
        e++;  // rounding crossed the 2^31 boundary; retry one exponent up
        bumped = true;
        break;
      }
      out.frac[i] = static_cast<int32_t>(f);
    }
    if (!bumped) break;
  }
  out.exponent = e;
  return out;
}

RealMatrix to_real(const FixedPointMatrix& m) {
  RealMatrix out(m.rows, m.cols);
  for (size_t i = 0; i < m.frac.size(); i++)
    out.data[i] = std::ldexp(static_cast<double>(m.frac[i]), m.exponent - kFracBits);
  return out;
}

FixedPointMatrix fp_matmul(const FixedPointMatrix& a, const FixedPointMatrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("fp_matmul: inner dimensions differ");
  // Accumulate per-product rounded shifts; each term is independent so the
  // i-k-j loop order changes nothing but cache behaviour.
  std::vector<int64_t> acc(static_cast<size_t>(a.rows) * b.cols, 0);
  for (int i = 0; i < a.rows; i++) {
    const int32_t* arow = &a.frac[static_cast<size_t>(i) * a.cols];
    int64_t* crow = &acc[static_cast<size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; k++) {
      const int64_t av = arow[k];
      if (av == 0) continue;
      const int32_t* brow = &b.frac[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; j++)
        crow[j] += round_shift(av * brow[j], kFracBits);
    }
  }
  return fp_from_acc(acc, a.rows, b.cols, a.exponent + b.exponent);
}

FixedPointMatrix fp_from_acc(const std::vector<int64_t>& acc, int rows, int cols,
                             int raw_exponent) {
  int64_t maxabs = 0;
  for (int64_t v : acc) maxabs = std::max<int64_t>(maxabs, v < 0 ? -v : v);
  FixedPointMatrix out(rows, cols);
  if (maxabs == 0) {
    out.exponent = 0;
    return out;
  }
  int shift = 0;  // positive: shift fracs right
  while ((maxabs >> shift) >= (int64_t{1} << kFracBits)) shift++;
  if (shift == 0)
    while (shift > -kFracBits && (maxabs << (-shift + 1)) < (int64_t{1} << kFracBits)) shift--;
  for (size_t i = 0; i < acc.size(); i++) {
    int64_t f = shift >= 0 ? round_shift(acc[i], shift) : acc[i] << -shift;
    if (f >= (int64_t{1} << kFracBits)) f = (int64_t{1} << kFracBits) - 1;
    if (f < -(int64_t{1} << kFracBits)) f = -(int64_t{1} << kFracBits);
    out.frac[i] = static_cast<int32_t>(f);
  }
  out.exponent = raw_exponent + shift;
  return out;
}

FixedPointMatrix fp_transpose(const FixedPointMatrix& m) {
  FixedPointMatrix out(m.cols, m.rows);
  out.exponent = m.exponent;
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) out.at(c, r) = m.at(r, c);
  return out;
}

FixedPointMatrix softmax_rows(const FixedPointMatrix& m) {
  if (m.rows == 0 || m.cols == 0)
    throw std::invalid_argument("softmax_rows: empty matrix");
  RealMatrix vals = to_real(m);
  RealMatrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; r++) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < m.cols; c++) mx = std::max(mx, vals.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < m.cols; c++) {
      double e = std::exp(vals.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < m.cols; c++) out.at(r, c) /= sum;
  }
  return extract_exponent(out);
}

IntMatrix quantize(const FixedPointMatrix& m, const QuantConfig& q) {
  q.validate();
  const int64_t lim = (int64_t{1} << (q.bits - 1)) - 1;
  IntMatrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) {
      int64_t v = std::llround(q.gamma * m.value_at(r, c));
      if (v > lim) v = lim;
      if (v < -lim) v = -lim;  // symmetric clip keeps the code sign-balanced
      out.at(r, c) = v;
    }
  return out;
}

FixedPointMatrix dequantize(const IntMatrix& m, const QuantConfig& q, int power) {
  q.validate();
  if (power < 1) throw std::invalid_argument("dequantize: power must be >= 1");
  const double inv = 1.0 / std::pow(q.gamma, power);
  RealMatrix out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); i++)
    out.data[i] = static_cast<double>(m.data[i]) * inv;
  return extract_exponent(out);
}

IntMatrix int_matmul(const IntMatrix& a, const IntMatrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("int_matmul: inner dimensions differ");
  IntMatrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; i++) {
    const int64_t* arow = &a.data[static_cast<size_t>(i) * a.cols];
    int64_t* crow = &out.data[static_cast<size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; k++) {
      const int64_t av = arow[k];
      if (av == 0) continue;
      const int64_t* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; j++) crow[j] += av * brow[j];
    }
  }
  return out;
}

IntMatrix int_transpose(const IntMatrix& m) {
  IntMatrix out(m.cols, m.rows);
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) out.at(c, r) = m.at(r, c);
  return out;
}

FixedPointMatrix dense_attention_oracle(const FixedPointMatrix& x,
                                        const FixedPointMatrix& wq,
                                        const FixedPointMatrix& wk,
                                        const FixedPointMatrix& wv, int d) {
  FixedPointMatrix qm = fp_matmul(x, wq);
  FixedPointMatrix km = fp_matmul(x, wk);
  FixedPointMatrix vm = fp_matmul(x, wv);
  FixedPointMatrix scores = fp_matmul(qm, fp_transpose(km));
  RealMatrix s = to_real(scores);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : s.data) v *= inv;
  FixedPointMatrix p = softmax_rows(extract_exponent(s));
  return fp_matmul(p, vm);
}

}  // namespace cpsaa
