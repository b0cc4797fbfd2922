#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsaa/crossbar.hpp"
#include "cpsaa/kernels.hpp"
#include "cpsaa/workload.hpp"

namespace cpsaa {

// ---- modes and knobs ----------------------------------------------------

enum class CalculationMode { CPSAA, ReBERT_like, ReTransformer_like, CPDAA };

std::string mode_name(CalculationMode m);
CalculationMode parse_mode(const std::string& s);  // throws std::invalid_argument
std::vector<CalculationMode> all_modes();

// Idealization switches for the limit study. Each removes one cost while the
// rest of the model stays put; energy of the removed cost is kept so the
// study isolates latency effects.
struct IdealKnobs {
  bool zero_write = false;     // array writes take no time (dispatch remains)
  bool zero_transfer = false;  // on/off-chip transfers take no time
  bool infinite_adc = false;   // one converter per array instead of per group
  bool zero_ctrl = false;      // dispatch serialization costs no time
};

// ---- timeline -----------------------------------------------------------

// One scheduled hardware activity. Writes and crossbar operations pass
// through the single controller stream (dispatch_* window); units, searches
// and transfers run as soon as their inputs are ready.
struct TimelineEvent {
  enum class Kind { Write, Vmm, Unit, Transfer, Search };

  std::string label;
  Kind kind = Kind::Unit;
  std::vector<int> deps;          // indices of earlier events
  double ready_ns = 0;            // all dependencies complete
  double ready_nonwrite_ns = 0;   // non-write dependencies complete
  double dispatch_start_ns = 0;
  double dispatch_end_ns = 0;     // execution begins here
  double start_ns = 0;
  double end_ns = 0;
  int64_t dispatch_units = 0;     // controller work items
  int ag_count = 0;
  int spread = 1;                 // arrays per converter group
  int64_t arrays = 0;
  bool attention_calc = false;    // counted by the parallelism metric
  std::string placement;          // operand store written or streamed over
};

struct StepSpan {
  std::string label;
  double start_ns = 0;
  double end_ns = 0;
};

struct KernelStat {
  std::string kernel;
  int64_t cycles = 0;
  int64_t arrays_used = 0;
  int64_t effective_macs = 0;
  int64_t replication_rows = 0;
};

// ---- report ---------------------------------------------------------------------

struct SimReport {
  std::string mode;
  uint64_t seed = 0;
  WorkloadSpec workload;
  HardwareConfig config;  // as configured, before knob adjustment
  double total_ns = 0;
  double w4w_ns = 0;  // VMM wait time attributable to array writes
  int64_t peak_parallel_arrays = 0;
  double gops = 0;
  double gops_per_watt = 0;
  EnergyLedger energy;
  std::vector<StepSpan> steps;
  std::vector<KernelStat> kernel_stats;
  std::vector<std::string> warnings;
  // Carried for verification and composition; not serialized.
  FixedPointMatrix z;
  std::vector<TimelineEvent> timeline;
};

// ---- simulation entry points ----------------------------------------------------

// One self-attention layer in the given mode, input transfer through output
// transfer. Throws ConfigError / CapacityError on infeasible setups.
SimReport simulate_layer(const Workload& w, CalculationMode mode,
                         const HardwareConfig& hw, const IdealKnobs& knobs = {});

// `layers` serial encoder layers. Each layer runs attention on the current
// activations, projects the result back to d_model through a stored FC
// weight, and hands the projection to the next layer.
SimReport simulate_encoder_stack(const Workload& w, int layers, CalculationMode mode,
                                 const HardwareConfig& hw, const IdealKnobs& knobs = {});

// Runs independent batches back to back: total time is the sum of the batch
// times plus one input transfer between consecutive batches (result unload
// overlaps the next load except for that staging hop). `workers` parallelizes
// the per-batch simulations; results are merged in batch order, so the report
// does not depend on the worker count.
SimReport batch_driver(const std::vector<Workload>& batches, CalculationMode mode,
                       const HardwareConfig& hw, const IdealKnobs& knobs = {},
                       int workers = 1);

// ---- studies --------------------------------------------------------------------

struct KnobStudyRow {
  std::string knob;
  double total_ns = 0;
  double gops = 0;
  double gain_pct = 0;  // throughput gain over the baseline row
};

// Baseline, each knob alone, then all knobs together.
std::vector<KnobStudyRow> knob_study(const Workload& w, CalculationMode mode,
                                     const HardwareConfig& hw);

// ---- invariants -----------------------------------------------------------------

// Structural audit of a finished timeline: dependency ordering, controller
// serialization, write/stream exclusion per placement, and total consistency.
// Returns false and fills `why` on the first violation.
bool validate_timeline(const SimReport& report, std::string* why = nullptr);

}  // namespace cpsaa
