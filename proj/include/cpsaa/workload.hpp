#pragma once

#include <cstdint>
#include <string>

#include "cpsaa/fixed_point.hpp"
#include "cpsaa/mask.hpp"

namespace cpsaa {

// Deterministic stream generator (splitmix64).
struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double next_unit() {  // [0, 1)
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

  double next_signed_unit() {  // [-1, 1)
    return static_cast<double>(next() >> 11) * (1.0 / 4503599627370496.0) - 1.0;
  }
};

// ---- workload description ------------------------------------------------------

struct WorkloadSpec {
  int seq_len = 320;
  int d_model = 512;
  int d = 64;    // attention head width
  int d_v = 64;  // value width
  double density = 0.1;
  std::string mask_kind = "random";  // random | banded | lower_triangular | file
  std::string mask_file;
  int quant_bits = 4;
  double theta = 0.0;  // binarization threshold, 0 = 1 / (2 * seq_len)
  uint64_t seed = 42;
  int batch_count = 1;

  void validate() const;  // throws std::invalid_argument
};

// Fully materialized inputs of one attention layer.
struct Workload {
  WorkloadSpec spec;
  FixedPointMatrix x;    // seq_len x d_model activations
  FixedPointMatrix wq;   // d_model x d
  FixedPointMatrix wk;   // d_model x d
  FixedPointMatrix wv;   // d_model x d_v
  FixedPointMatrix ws;   // wq * wk^T, the fused score weight
  IntMatrix ws_quant;    // quantized fused weight for the pruning path
  QuantConfig qcfg;
  MaskMatrix mask;       // the sparsity pattern the kernels honour
};

// Synthesizes a deterministic workload: activations and weights in [-1, 1),
// the fused weight from the projections, a shared quantization scale sized to
// the largest operand, and the mask for the requested kind.
Workload synth_workload(const WorkloadSpec& spec);

}  // namespace cpsaa
