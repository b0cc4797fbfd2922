#include "cpsaa/report.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cpsaa {

using nlohmann::ordered_json;

double round_sig(double v, int digits) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  double mag = std::floor(std::log10(std::fabs(v)));
  double scale = std::pow(10.0, digits - 1 - mag);
  return std::round(v * scale) / scale;
}

// ---- scalar helpers --------------------------------------------------------

namespace {

double rs(double v) { return round_sig(v); }

// dump_config value -> typed json scalar (int, double, bool or string).
ordered_json typed_scalar(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  errno = 0;
  char* end = nullptr;
  long long i = std::strtoll(v.c_str(), &end, 10);
  if (end && *end == '\0' && errno == 0) return i;
  end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (end && *end == '\0') return d;
  return v;
}

// json scalar -> config-file value text. %.17g keeps doubles exact across the
// round trip through apply_config_kv.
std::string scalar_text(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
  return buf;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

// ---- workload / config views ------------------------------------------------

ordered_json workload_json(const WorkloadSpec& s) {
  ordered_json j;
  j["seq_len"] = s.seq_len;
  j["d_model"] = s.d_model;
  j["d"] = s.d;
  j["d_v"] = s.d_v;
  j["density"] = s.density;
  j["mask_kind"] = s.mask_kind;
  j["mask_file"] = s.mask_file;
  j["quant_bits"] = s.quant_bits;
  j["theta"] = s.theta;
  j["seed"] = s.seed;
  j["batch_count"] = s.batch_count;
  return j;
}

WorkloadSpec workload_from_json(const ordered_json& j) {
  WorkloadSpec s;
  s.seq_len = j.at("seq_len").get<int>();
  s.d_model = j.at("d_model").get<int>();
  s.d = j.at("d").get<int>();
  s.d_v = j.at("d_v").get<int>();
  s.density = j.at("density").get<double>();
  s.mask_kind = j.at("mask_kind").get<std::string>();
  s.mask_file = j.at("mask_file").get<std::string>();
  s.quant_bits = j.at("quant_bits").get<int>();
  s.theta = j.at("theta").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.batch_count = j.at("batch_count").get<int>();
  return s;
}

ordered_json config_json(const HardwareConfig& hw) {
  ordered_json j;
  std::istringstream in(dump_config(hw));
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    j[trim(line.substr(0, eq))] = typed_scalar(trim(line.substr(eq + 1)));
  }
  return j;
}

HardwareConfig config_from_json(const ordered_json& j) {
  HardwareConfig hw;
  for (auto it = j.begin(); it != j.end(); ++it)
    apply_config_kv(hw, it.key(), scalar_text(it.value()));
  hw.validate();
  return hw;
}

// ---- report ------------------------------------------------------------------

ordered_json report_json(const SimReport& r) {
  ordered_json j;
  j["mode"] = r.mode;
  j["config"] = config_json(r.config);
  j["workload"] = workload_json(r.workload);
  j["seed"] = r.seed;
  j["total_ns"] = rs(r.total_ns);
  j["w4w_ns"] = rs(r.w4w_ns);
  j["peak_parallel_arrays"] = r.peak_parallel_arrays;
  j["gops"] = rs(r.gops);
  j["gops_per_watt"] = rs(r.gops_per_watt);
  ordered_json e;
  e["vmm"] = rs(r.energy.vmm);
  e["write"] = rs(r.energy.write);
  e["adc"] = rs(r.energy.adc);
  e["dac"] = rs(r.energy.dac);
  e["transfer"] = rs(r.energy.transfer);
  e["scheduler"] = rs(r.energy.scheduler);
  e["peripheral"] = rs(r.energy.peripheral);
  e["total_pj"] = rs(rs(r.energy.vmm) + rs(r.energy.write) + rs(r.energy.adc) + rs(r.energy.dac) +
                     rs(r.energy.transfer) + rs(r.energy.scheduler) + rs(r.energy.peripheral));
  j["energy"] = std::move(e);
  ordered_json steps = ordered_json::array();
  for (const auto& s : r.steps) {
    ordered_json o;
    o["label"] = s.label;
    o["start_ns"] = rs(s.start_ns);
    o["end_ns"] = rs(s.end_ns);
    steps.push_back(std::move(o));
  }
  j["steps"] = std::move(steps);
  ordered_json stats = ordered_json::array();
  for (const auto& k : r.kernel_stats) {
    ordered_json o;
    o["kernel"] = k.kernel;
    o["cycles"] = k.cycles;
    o["arrays_used"] = k.arrays_used;
    o["effective_macs"] = k.effective_macs;
    o["replication_rows"] = k.replication_rows;
    stats.push_back(std::move(o));
  }
  j["kernel_stats"] = std::move(stats);
  j["warnings"] = r.warnings;
  return j;
}

SimReport report_from_json(const ordered_json& j) {
  SimReport r;
  r.mode = j.at("mode").get<std::string>();
  r.config = config_from_json(j.at("config"));
  r.workload = workload_from_json(j.at("workload"));
  r.seed = j.at("seed").get<uint64_t>();
  r.total_ns = j.at("total_ns").get<double>();
  r.w4w_ns = j.at("w4w_ns").get<double>();
  r.peak_parallel_arrays = j.at("peak_parallel_arrays").get<int64_t>();
  r.gops = j.at("gops").get<double>();
  r.gops_per_watt = j.at("gops_per_watt").get<double>();
  const auto& e = j.at("energy");
  r.energy.vmm = e.at("vmm").get<double>();
  r.energy.write = e.at("write").get<double>();
  r.energy.adc = e.at("adc").get<double>();
  r.energy.dac = e.at("dac").get<double>();
  r.energy.transfer = e.at("transfer").get<double>();
  r.energy.scheduler = e.at("scheduler").get<double>();
  r.energy.peripheral = e.at("peripheral").get<double>();
  for (const auto& s : j.at("steps")) {
    StepSpan span;
    span.label = s.at("label").get<std::string>();
    span.start_ns = s.at("start_ns").get<double>();
    span.end_ns = s.at("end_ns").get<double>();
    r.steps.push_back(std::move(span));
  }
  for (const auto& k : j.at("kernel_stats")) {
    KernelStat st;
    st.kernel = k.at("kernel").get<std::string>();
    st.cycles = k.at("cycles").get<int64_t>();
    st.arrays_used = k.at("arrays_used").get<int64_t>();
    st.effective_macs = k.at("effective_macs").get<int64_t>();
    st.replication_rows = k.at("replication_rows").get<int64_t>();
    r.kernel_stats.push_back(std::move(st));
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string report_to_json_text(const SimReport& r) { return report_json(r).dump(2) + "\n"; }

SimReport parse_report(const std::string& json_text) {
  try {
    return report_from_json(ordered_json::parse(json_text));
  } catch (const nlohmann::json::exception& e) {
    throw FileError(std::string("report: ") + e.what());
  }
}

// ---- files ---------------------------------------------------------------------

void write_text_file(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path dst(path);
  fs::path tmp = dst;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FileError("cannot write " + tmp.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw FileError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, dst, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    throw FileError("cannot replace " + path + ": " + ec.message());
  }
}

void emit_report(const SimReport& r, const std::string& path) {
  write_text_file(path, report_to_json_text(r));
}

SimReport load_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot read " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_report(buf.str());
}

// ---- csv -----------------------------------------------------------------------

std::string speedup_csv(const std::vector<SpeedupPoint>& points) {
  std::ostringstream o;
  o << "density,xb,ddmm_cycles,sddmm_cycles,speedup\n";
  for (const auto& p : points)
    o << p.density << ',' << p.xb << ',' << p.ddmm_cycles << ',' << p.sddmm_cycles << ','
      << rs(p.speedup) << "\n";
  return o.str();
}

std::string knob_csv(const std::vector<KnobStudyRow>& rows) {
  std::ostringstream o;
  o << "knob,total_ns,gops,gain_pct\n";
  for (const auto& r : rows)
    o << r.knob << ',' << rs(r.total_ns) << ',' << rs(r.gops) << ',' << rs(r.gain_pct) << "\n";
  return o.str();
}

}  // namespace cpsaa
