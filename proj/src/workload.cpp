#include "cpsaa/workload.hpp"

#include <cmath>
#include <stdexcept>

namespace cpsaa {

namespace {

// Distinct sub-streams per operand so changing one dimension does not shift
// the values of another operand.
constexpr uint64_t kStreamX = 0x11aa22bb33cc44ddULL;
constexpr uint64_t kStreamWq = 0x5566778899aabbccULL;
constexpr uint64_t kStreamWk = 0xddeeff0011223344ULL;
constexpr uint64_t kStreamWv = 0x8091a2b3c4d5e6f7ULL;

FixedPointMatrix random_operand(int rows, int cols, uint64_t seed) {
  SplitMix64 rng(seed);
  RealMatrix m(rows, cols);
  for (double& v : m.data) v = rng.next_signed_unit();
  return extract_exponent(m);
}

double max_abs_value(const FixedPointMatrix& m) {
  int32_t top = 0;
  for (int32_t f : m.frac) top = std::max(top, f < 0 ? -f : f);
  return std::ldexp(static_cast<double>(top), m.exponent - kFracBits);
}

}  // namespace

void WorkloadSpec::validate() const {
  if (seq_len < 0) throw std::invalid_argument("seq_len must be >= 0");
  if (d_model < 1) throw std::invalid_argument("d_model must be >= 1");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (d_v < 1) throw std::invalid_argument("d_v must be >= 1");
  if (!(density > 0.0 && density <= 1.0))
    throw std::invalid_argument("density must be in (0, 1]");
  if (quant_bits < 2 || quant_bits > 16)
    throw std::invalid_argument("quant_bits must be in [2, 16]");
  if (theta < 0.0) throw std::invalid_argument("theta must be >= 0");
  if (batch_count < 1) throw std::invalid_argument("batch_count must be >= 1");
  if (mask_kind != "random" && mask_kind != "banded" &&
      mask_kind != "lower_triangular" && mask_kind != "file")
    throw std::invalid_argument("unknown mask_kind '" + mask_kind + "'");
  if (mask_kind == "file" && mask_file.empty())
    throw std::invalid_argument("mask_kind 'file' requires mask_file");
}

Workload synth_workload(const WorkloadSpec& spec) {
  spec.validate();
  Workload w;
  w.spec = spec;
  const int n = spec.seq_len;

  w.x = random_operand(n, spec.d_model, spec.seed ^ kStreamX);
  w.wq = random_operand(spec.d_model, spec.d, spec.seed ^ kStreamWq);
  w.wk = random_operand(spec.d_model, spec.d, spec.seed ^ kStreamWk);
  w.wv = random_operand(spec.d_model, spec.d_v, spec.seed ^ kStreamWv);
  w.ws = fp_matmul(w.wq, fp_transpose(w.wk));

  // One scale shared by activations and the fused weight keeps the integer
  // products of the pruning path on a common grid.
  double top = std::max(max_abs_value(w.x), max_abs_value(w.ws));
  w.qcfg.bits = spec.quant_bits;
  w.qcfg.gamma = top > 0.0 ? std::ldexp(1.0, spec.quant_bits - 2) / top : 1.0;
  w.qcfg.theta = spec.theta > 0.0 ? spec.theta : 1.0 / (2.0 * std::max(n, 1));
  w.qcfg.d = spec.d;
  w.qcfg.validate();
  w.ws_quant = quantize(w.ws, w.qcfg);

  if (spec.mask_kind == "random") {
    w.mask = spec.density >= 1.0 ? full_mask(n, n)
                                 : random_mask(n, n, spec.density, spec.seed + 17);
  } else if (spec.mask_kind == "banded") {
    int band = std::max<int>(1, static_cast<int>(std::llround(spec.density * n)));
    w.mask = banded_mask(n, band);
  } else if (spec.mask_kind == "lower_triangular") {
    w.mask = lower_triangular_mask(n);
  } else {
    w.mask = load_mask(spec.mask_file);
    if (w.mask.rows != n || w.mask.cols != n)
      throw FileError("mask file is " + std::to_string(w.mask.rows) + "x" +
                      std::to_string(w.mask.cols) + ", workload needs " +
                      std::to_string(n) + "x" + std::to_string(n));
  }
  return w;
}

}  // namespace cpsaa
