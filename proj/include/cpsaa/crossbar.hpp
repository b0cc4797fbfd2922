#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpsaa/fixed_point.hpp"

namespace cpsaa {

// Thrown for unknown config keys or unparseable values.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an allocation cannot fit the array pools.
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// ---- hardware description ---------------------------------------------------

// Geometry, timing, power and policy of the accelerator. Field names double
// as the config-file keys; unknown keys are rejected on load.
struct HardwareConfig {
  // array geometry
  int xb_rows = 32;            // wordlines per crossbar
  int xb_cols = 32;            // bitlines per crossbar
  int bits_per_cell = 1;
  int arrays_per_ag = 12;      // crossbars sharing one converter group
  int adc_per_ag = 1;
  int adc_resolution_bits = 8;
  int dac_bits = 2;
  int roa_ags_per_tile = 11;   // read-only (preloaded weight) groups
  int wea_ags_per_tile = 56;   // write-enabled groups
  int tiles = 64;
  int recam_banks = 2;         // scheduler CAM banks
  int recam_rows = 512;
  int recam_cols = 512;

  // timing (ns)
  double cycle_ns = 25.0;
  double set_ns = 1.52;
  double reset_ns = 2.11;
  double ctrl_dispatch_ns = 1.0;  // controller cost per dispatched work unit

  // interconnect
  double oci_gb_per_s = 1000.0;
  double transfer_pj_per_bit = 7.0;

  // component power (mW). Array-level blocks are charged per active array
  // or group; tile-level blocks form the static floor.
  double xb_mw = 0.581;
  double adc_mw = 2.0;
  double dac_mw = 1.513;
  double sh_mw = 0.074;
  double ir_mw = 0.294;
  double or_mw = 0.108;
  double sa_mw = 0.051;
  double recam_mw = 1.398;
  double ait_mw = 36.89;
  double ib_mw = 18.47;
  double cb_mw = 74.21;
  double ctrl_mw = 0.382;
  double su_mw = 1.134;
  double qu_mw = 0.121;

  // policy
  std::string write_row_cost_mode = "sum";  // "sum": set+reset per row, "max": slower phase only
  int bit_serial_factor = 1;                // extra input-bit slicing passes
  bool include_static_power = false;        // add the tile static floor to the ledger

  // derived helpers
  int numbers_per_row(int value_bits) const;  // operand values one crossbar row can hold
  int roa_ags() const { return roa_ags_per_tile * tiles; }
  int wea_ags() const { return wea_ags_per_tile * tiles; }
  int64_t roa_arrays() const { return static_cast<int64_t>(roa_ags()) * arrays_per_ag; }
  int64_t wea_arrays() const { return static_cast<int64_t>(wea_ags()) * arrays_per_ag; }
  double per_row_write_ns() const;
  double tile_static_mw() const;  // shared per-tile blocks (CAM, tables, buffers, units)

  void validate() const;  // throws ConfigError
};

// key=value text, '#' comments. Unknown keys and bad values throw ConfigError.
HardwareConfig load_config(const std::string& path);
void apply_config_kv(HardwareConfig& hw, const std::string& key, const std::string& value);
std::string dump_config(const HardwareConfig& hw);  // fully resolved, reloadable

// ---- energy ledger -----------------------------------------------------------

// Per-category energy in pJ. mW times ns is exactly pJ, so every charge below
// is power_mw * duration_ns.
struct EnergyLedger {
  double vmm = 0.0;         // crossbar compute
  double write = 0.0;       // operand writes
  double adc = 0.0;
  double dac = 0.0;
  double transfer = 0.0;    // interconnect
  double scheduler = 0.0;   // CAM writes and searches
  double peripheral = 0.0;  // streaming units, controller, static floor

  double total_pj() const { return vmm + write + adc + dac + transfer + scheduler + peripheral; }
  EnergyLedger& operator+=(const EnergyLedger& o);
};

// ---- cost primitives -----------------------------------------------------------

struct WriteCost {
  double latency_ns = 0.0;
  double energy_pj = 0.0;
};

// Writing `rows` crossbar rows balanced over `ags` groups. Rows within one
// group serialize; groups run in parallel.
WriteCost write_matrix(const HardwareConfig& hw, int64_t rows, int ags);

// Cycles to drain per-array conversion queues: each group resolves
// max(longest queue, ceil(total / adc_per_ag)) cycles, the op takes the
// slowest group, and bit slicing multiplies the whole schedule.
int64_t vmm_cycles(const HardwareConfig& hw,
                   const std::vector<std::vector<int64_t>>& ag_queues);

// Compute energy of `arrays_active` arrays busy for `cycles`, with converter
// energy charged per group. The two-argument form assumes packed groups.
EnergyLedger vmm_energy(const HardwareConfig& hw, int64_t arrays_active, int64_t cycles);
EnergyLedger vmm_energy(const HardwareConfig& hw, int64_t arrays_active, int64_t ag_count,
                        int64_t cycles);

struct TransferCost {
  double latency_ns = 0.0;
  double energy_pj = 0.0;
};

TransferCost transfer_cost(const HardwareConfig& hw, int64_t bits);

// ---- placement ------------------------------------------------------------------

enum class Region { ROA, WEA };

// One stored operand: `arrays` crossbars spread `spread` per group.
struct Placement {
  std::string name;
  Region region = Region::WEA;
  int64_t arrays = 0;
  int ag_count = 0;
  int spread = 1;        // arrays per group actually used
  int64_t rows = 0;      // crossbar rows the operand occupies (write volume)
  bool spilled = false;  // wanted ROA, landed in WEA
};

// Arrays an operand with `inner` rows and `out_cols` columns occupies at the
// given value width: chained groups of ceil(inner / xb_rows) arrays, with
// numbers_per_row(value_bits) output columns sharing each chain.
int64_t operand_arrays(const HardwareConfig& hw, int inner, int out_cols, int value_bits);
int64_t operand_rows(const HardwareConfig& hw, int inner, int out_cols, int value_bits);

// Array-pool allocator. Placements that prefer the read-only pool spill whole
// into the write-enabled pool (with a warning) when they do not fit.
struct Fabric {
  explicit Fabric(const HardwareConfig& hw);

  // spread 0 packs arrays_per_ag per group. Throws CapacityError when even the
  // write-enabled pool cannot take the placement.
  Placement place(const std::string& name, int64_t arrays, int64_t rows, int spread,
                  Region want);
  WriteCost write_to(const Placement& p, int64_t rows) const;  // rejects ROA targets

  int roa_free_ags() const { return roa_free_; }
  int wea_free_ags() const { return wea_free_; }
  const std::vector<Placement>& placements() const { return placements_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  const HardwareConfig* hw_;
  int roa_free_ = 0;
  int wea_free_ = 0;
  std::vector<Placement> placements_;
  std::vector<std::string> warnings_;
};

// Stages the preloaded operands (weights and their quantized form) into the
// read-only pool, spilling what does not fit. Throws CapacityError when the
// combined pools cannot hold them.
Fabric preload_roa(const HardwareConfig& hw, const FixedPointMatrix& ws,
                   const FixedPointMatrix& wv, const IntMatrix& ws_quant, int quant_bits);

}  // namespace cpsaa
