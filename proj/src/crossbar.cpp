#include "cpsaa/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cpsaa {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

int parse_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config: trailing junk for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config: trailing junk for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad bool for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(HardwareConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
#define INT_KEY(field) {#field, [](HardwareConfig& h, const std::string& k, const std::string& v) { h.field = parse_int(k, v); }}
#define DBL_KEY(field) {#field, [](HardwareConfig& h, const std::string& k, const std::string& v) { h.field = parse_double(k, v); }}
      INT_KEY(xb_rows),
      INT_KEY(xb_cols),
      INT_KEY(bits_per_cell),
      INT_KEY(arrays_per_ag),
      INT_KEY(adc_per_ag),
      INT_KEY(adc_resolution_bits),
      INT_KEY(dac_bits),
      INT_KEY(roa_ags_per_tile),
      INT_KEY(wea_ags_per_tile),
      INT_KEY(tiles),
      INT_KEY(recam_banks),
      INT_KEY(recam_rows),
      INT_KEY(recam_cols),
      DBL_KEY(cycle_ns),
      DBL_KEY(set_ns),
      DBL_KEY(reset_ns),
      DBL_KEY(ctrl_dispatch_ns),
      DBL_KEY(oci_gb_per_s),
      DBL_KEY(transfer_pj_per_bit),
      DBL_KEY(xb_mw),
      DBL_KEY(adc_mw),
      DBL_KEY(dac_mw),
      DBL_KEY(sh_mw),
      DBL_KEY(ir_mw),
      DBL_KEY(or_mw),
      DBL_KEY(sa_mw),
      DBL_KEY(recam_mw),
      DBL_KEY(ait_mw),
      DBL_KEY(ib_mw),
      DBL_KEY(cb_mw),
      DBL_KEY(ctrl_mw),
      DBL_KEY(su_mw),
      DBL_KEY(qu_mw),
      INT_KEY(bit_serial_factor),
#undef INT_KEY
#undef DBL_KEY
      {"write_row_cost_mode",
       [](HardwareConfig& h, const std::string&, const std::string& v) { h.write_row_cost_mode = v; }},
      {"include_static_power",
       [](HardwareConfig& h, const std::string& k, const std::string& v) {
         h.include_static_power = parse_bool(k, v);
       }},
  };
  return table;
}

}  // namespace

// ---- HardwareConfig ----------------------------------------------------------

int HardwareConfig::numbers_per_row(int value_bits) const {
  return std::max(1, xb_cols * bits_per_cell / value_bits);
}

double HardwareConfig::per_row_write_ns() const {
  return write_row_cost_mode == "max" ? std::max(set_ns, reset_ns) : set_ns + reset_ns;
}

double HardwareConfig::tile_static_mw() const {
  return recam_mw + ait_mw + ib_mw + cb_mw + ctrl_mw + su_mw + qu_mw;
}

void HardwareConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("config: ") + name + " must be >= 1");
  };
  positive(xb_rows, "xb_rows");
  positive(xb_cols, "xb_cols");
  positive(bits_per_cell, "bits_per_cell");
  positive(arrays_per_ag, "arrays_per_ag");
  positive(adc_per_ag, "adc_per_ag");
  positive(roa_ags_per_tile, "roa_ags_per_tile");
  positive(wea_ags_per_tile, "wea_ags_per_tile");
  positive(tiles, "tiles");
  positive(bit_serial_factor, "bit_serial_factor");
  if (cycle_ns <= 0.0) throw ConfigError("config: cycle_ns must be > 0");
  if (set_ns < 0.0 || reset_ns < 0.0) throw ConfigError("config: write phase times must be >= 0");
  if (ctrl_dispatch_ns < 0.0) throw ConfigError("config: ctrl_dispatch_ns must be >= 0");
  if (oci_gb_per_s <= 0.0) throw ConfigError("config: oci_gb_per_s must be > 0");
  if (write_row_cost_mode != "sum" && write_row_cost_mode != "max")
    throw ConfigError("config: write_row_cost_mode must be 'sum' or 'max'");
}

void apply_config_kv(HardwareConfig& hw, const std::string& key, const std::string& value) {
  auto it = key_table().find(key);
  if (it == key_table().end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(hw, key, value);
}

HardwareConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  HardwareConfig hw;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    apply_config_kv(hw, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  hw.validate();
  return hw;
}

std::string dump_config(const HardwareConfig& hw) {
  std::ostringstream o;
  o << "# array geometry\n"
    << "xb_rows = " << hw.xb_rows << "\n"
    << "xb_cols = " << hw.xb_cols << "\n"
    << "bits_per_cell = " << hw.bits_per_cell << "\n"
    << "arrays_per_ag = " << hw.arrays_per_ag << "\n"
    << "adc_per_ag = " << hw.adc_per_ag << "\n"
    << "adc_resolution_bits = " << hw.adc_resolution_bits << "\n"
    << "dac_bits = " << hw.dac_bits << "\n"
    << "roa_ags_per_tile = " << hw.roa_ags_per_tile << "\n"
    << "wea_ags_per_tile = " << hw.wea_ags_per_tile << "\n"
    << "tiles = " << hw.tiles << "\n"
    << "recam_banks = " << hw.recam_banks << "\n"
    << "recam_rows = " << hw.recam_rows << "\n"
    << "recam_cols = " << hw.recam_cols << "\n"
    << "# timing (ns)\n"
    << "cycle_ns = " << hw.cycle_ns << "\n"
    << "set_ns = " << hw.set_ns << "\n"
    << "reset_ns = " << hw.reset_ns << "\n"
    << "ctrl_dispatch_ns = " << hw.ctrl_dispatch_ns << "\n"
    << "# interconnect\n"
    << "oci_gb_per_s = " << hw.oci_gb_per_s << "\n"
    << "transfer_pj_per_bit = " << hw.transfer_pj_per_bit << "\n"
    << "# power (mW)\n"
    << "xb_mw = " << hw.xb_mw << "\n"
    << "adc_mw = " << hw.adc_mw << "\n"
    << "dac_mw = " << hw.dac_mw << "\n"
    << "sh_mw = " << hw.sh_mw << "\n"
    << "ir_mw = " << hw.ir_mw << "\n"
    << "or_mw = " << hw.or_mw << "\n"
    << "sa_mw = " << hw.sa_mw << "\n"
    << "recam_mw = " << hw.recam_mw << "\n"
    << "ait_mw = " << hw.ait_mw << "\n"
    << "ib_mw = " << hw.ib_mw << "\n"
    << "cb_mw = " << hw.cb_mw << "\n"
    << "ctrl_mw = " << hw.ctrl_mw << "\n"
    << "su_mw = " << hw.su_mw << "\n"
    << "qu_mw = " << hw.qu_mw << "\n"
    << "# policy\n"
    << "write_row_cost_mode = " << hw.write_row_cost_mode << "\n"
    << "bit_serial_factor = " << hw.bit_serial_factor << "\n"
    << "include_static_power = " << (hw.include_static_power ? "true" : "false") << "\n";
  return o.str();
}

// ---- ledger -------------------------------------------------------------------

EnergyLedger& EnergyLedger::operator+=(const EnergyLedger& o) {
  vmm += o.vmm;
  write += o.write;
  adc += o.adc;
  dac += o.dac;
  transfer += o.transfer;
  scheduler += o.scheduler;
  peripheral += o.peripheral;
  return *this;
}

// ---- cost primitives ------------------------------------------------------------

WriteCost write_matrix(const HardwareConfig& hw, int64_t rows, int ags) {
  if (ags < 1) throw std::invalid_argument("write_matrix: ags must be >= 1");
  if (rows < 0) throw std::invalid_argument("write_matrix: negative row count");
  WriteCost c;
  c.latency_ns = static_cast<double>(ceil_div(rows, ags)) * hw.per_row_write_ns();
  c.energy_pj = static_cast<double>(rows) * hw.xb_mw * hw.per_row_write_ns();
  return c;
}

int64_t vmm_cycles(const HardwareConfig& hw,
                   const std::vector<std::vector<int64_t>>& ag_queues) {
  int64_t worst = 0;
  for (const auto& q : ag_queues) {
    int64_t longest = 0, total = 0;
    for (int64_t v : q) {
      longest = std::max(longest, v);
      total += v;
    }
    worst = std::max(worst, std::max(longest, ceil_div(total, hw.adc_per_ag)));
  }
  return worst * hw.bit_serial_factor;
}

EnergyLedger vmm_energy(const HardwareConfig& hw, int64_t arrays_active, int64_t cycles) {
  return vmm_energy(hw, arrays_active, ceil_div(arrays_active, hw.arrays_per_ag), cycles);
}

EnergyLedger vmm_energy(const HardwareConfig& hw, int64_t arrays_active, int64_t ag_count,
                        int64_t cycles) {
  EnergyLedger e;
  const double ns = static_cast<double>(cycles) * hw.cycle_ns;
  e.vmm = hw.xb_mw * static_cast<double>(arrays_active) * ns;
  e.adc = hw.adc_mw * static_cast<double>(hw.adc_per_ag) * static_cast<double>(ag_count) * ns;
  e.dac = hw.dac_mw * static_cast<double>(ag_count) * ns;
  return e;
}

TransferCost transfer_cost(const HardwareConfig& hw, int64_t bits) {
  TransferCost c;
  const double bits_per_ns = hw.oci_gb_per_s * 8.0 / 1000.0 * 1000.0;  // GB/s -> bits/ns
  c.latency_ns = static_cast<double>(bits) / bits_per_ns;
  c.energy_pj = hw.transfer_pj_per_bit * static_cast<double>(bits);
  return c;
}

// ---- placement -------------------------------------------------------------------

int64_t operand_arrays(const HardwareConfig& hw, int inner, int out_cols, int value_bits) {
  int64_t chains = ceil_div(inner, hw.xb_rows);
  int64_t col_groups = ceil_div(out_cols, hw.numbers_per_row(value_bits));
  return chains * col_groups;
}

int64_t operand_rows(const HardwareConfig& hw, int inner, int out_cols, int value_bits) {
  // Every array of a chain stores `inner` values down its rows (last chain
  // link partially); row writes are what the write path pays for.
  int64_t col_groups = ceil_div(out_cols, hw.numbers_per_row(value_bits));
  return col_groups * ceil_div(inner, hw.xb_rows) * hw.xb_rows;
}

Fabric::Fabric(const HardwareConfig& hw)
    : hw_(&hw), roa_free_(hw.roa_ags()), wea_free_(hw.wea_ags()) {}

Placement Fabric::place(const std::string& name, int64_t arrays, int64_t rows, int spread,
                        Region want) {
  Placement p;
  p.name = name;
  p.arrays = arrays;
  p.rows = rows;
  p.spread = spread > 0 ? std::min(spread, hw_->arrays_per_ag) : hw_->arrays_per_ag;
  p.ag_count = static_cast<int>(ceil_div(arrays, p.spread));
  p.region = want;

  if (want == Region::ROA && p.ag_count > roa_free_) {
    // Whole-operand spill: partial splits would leave the operand half
    // read-only and half rewriteable, which the scheduler cannot use.
    warnings_.push_back("placement '" + name + "' spilled to the write-enabled pool (needs " +
                        std::to_string(p.ag_count) + " groups, " + std::to_string(roa_free_) +
                        " read-only groups free)");
    p.region = Region::WEA;
    p.spilled = true;
  }
  if (p.region == Region::WEA && p.ag_count > wea_free_) {
    throw CapacityError("placement '" + name + "' needs " + std::to_string(p.ag_count) +
                        " groups (" + std::to_string(arrays) + " arrays); only " +
                        std::to_string(wea_free_) + " write-enabled groups free");
  }
  if (p.region == Region::ROA)
    roa_free_ -= p.ag_count;
  else
    wea_free_ -= p.ag_count;
  placements_.push_back(p);
  return p;
}

WriteCost Fabric::write_to(const Placement& p, int64_t rows) const {
  if (p.region == Region::ROA)
    throw std::logic_error("write_to: placement '" + p.name + "' is in the read-only region");
  return write_matrix(*hw_, rows, p.ag_count);
}

Fabric preload_roa(const HardwareConfig& hw, const FixedPointMatrix& ws,
                   const FixedPointMatrix& wv, const IntMatrix& ws_quant, int quant_bits) {
  Fabric fabric(hw);
  fabric.place("W_S", operand_arrays(hw, ws.rows, ws.cols, 32),
               operand_rows(hw, ws.rows, ws.cols, 32), 0, Region::ROA);
  fabric.place("W_V", operand_arrays(hw, wv.rows, wv.cols, 32),
               operand_rows(hw, wv.rows, wv.cols, 32), 0, Region::ROA);
  fabric.place("W_S_quant", operand_arrays(hw, ws_quant.rows, ws_quant.cols, quant_bits),
               operand_rows(hw, ws_quant.rows, ws_quant.cols, quant_bits), 0, Region::ROA);
  return fabric;
}

}  // namespace cpsaa
