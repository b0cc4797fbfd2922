#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsaa/crossbar.hpp"
#include "cpsaa/fixed_point.hpp"
#include "cpsaa/mask.hpp"

namespace cpsaa {

// ---- schedule bookkeeping ---------------------------------------------------

// What one kernel invocation did to the fabric: its conversion queues (one
// vector per converter group, one count per array), the cycle total from
// vmm_cycles, and the accounting the reports expose.
struct ScheduleResult {
  std::string kernel;
  int64_t cycles = 0;
  int64_t arrays_used = 0;
  int64_t effective_macs = 0;    // useful multiply-accumulates
  int64_t replication_rows = 0;  // operand rows duplicated by the scheduler
  int ag_count = 0;              // concurrent group footprint (largest wave)
  int waves = 1;                 // capacity-driven serial passes
  double utilization = 1.0;      // useful fraction of the issued activations
  std::vector<int64_t> wave_cycles;               // per-wave cycle counts, sums to `cycles`
  std::vector<std::vector<int64_t>> ag_queues;    // first wave's conversion queues
};

struct SddmmResult {
  FixedPointMatrix s;  // scores, exact zeros off-mask
  ScheduleResult sched;
};

struct SpmmResult {
  FixedPointMatrix z;
  ScheduleResult sched;
};

struct DdmmResult {
  FixedPointMatrix c;
  ScheduleResult sched;
};

// ---- kernels -----------------------------------------------------------------

// Sampled dense-dense product: computes only the on-mask entries of M * Xt.
// The stored operand is Xt; a column converts once per retained row of its
// mask column, and columns sharing an array merge their row sets.
// spread = arrays per group, 0 = packed.
SddmmResult sddmm(const FixedPointMatrix& m, const FixedPointMatrix& xt,
                  const MaskMatrix& mask, const HardwareConfig& hw, int spread = 0);

// Sparse-dense product with row replication: each retained query row gets a
// private copy of its V rows, so one activation per output row suffices.
// Rows are processed in capacity waves when they exceed `array_budget`
// (0 = the whole write-enabled pool). Throws CapacityError when a single
// row cannot fit, and std::invalid_argument when S has off-mask nonzeros.
SpmmResult spmm(const FixedPointMatrix& s, const FixedPointMatrix& v, const MaskMatrix& mask,
                const HardwareConfig& hw, int spread = 0, int64_t array_budget = 0);

// Unreplicated reference: V stored once, every score row streamed densely.
SpmmResult spmm_baseline(const FixedPointMatrix& s, const FixedPointMatrix& v,
                         const MaskMatrix& mask, const HardwareConfig& hw, int spread = 0);

// Dense-dense product with B stored; numerically identical to fp_matmul.
DdmmResult ddmm(const FixedPointMatrix& a, const FixedPointMatrix& b, const HardwareConfig& hw,
                int spread = 0);

// Cycle count for streaming `issues` dense activations over an operand laid
// out across `arrays` crossbars at the given spread (0 = packed). The queue of
// every array is the full issue stream; only converter sharing stretches it.
int64_t dense_stream_cycles(const HardwareConfig& hw, int64_t arrays, int spread,
                            int64_t issues);

// ---- sweeps ---------------------------------------------------------------------

struct SpeedupPoint {
  double density = 0.0;
  int xb = 0;
  int64_t ddmm_cycles = 0;
  int64_t sddmm_cycles = 0;
  double speedup = 0.0;
};

// Score-kernel speedup of masked over dense execution across densities and
// crossbar sizes, on synthetic operands seeded per density.
std::vector<SpeedupPoint> kernel_speedup_vs_density(int n, int d,
                                                    const std::vector<double>& densities,
                                                    const HardwareConfig& hw, uint64_t seed,
                                                    const std::vector<int>& xb_sizes = {32, 64,
                                                                                        128});

}  // namespace cpsaa
