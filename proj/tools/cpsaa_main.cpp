#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpsaa/report.hpp"

using namespace cpsaa;
using nlohmann::ordered_json;

namespace {

// ---- option plumbing -------------------------------------------------------

struct Options {
  WorkloadSpec spec;
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::string mode = "CPSAA";
  std::string out;
  std::string out_dir;
  std::string csv;
  int workers = 1;
  int layers = 2;
  // sweep
  std::string param = "density";
  std::string values = "0.05,0.1,0.2,0.5,1.0";
  std::string xb_sizes = "32,64,128";
};

void add_workload_flags(CLI::App* s, Options& o) {
  s->add_option("--seq-len", o.spec.seq_len, "sequence length n");
  s->add_option("--d-model", o.spec.d_model, "embedding width");
  s->add_option("--d", o.spec.d, "attention head width");
  s->add_option("--d-v", o.spec.d_v, "value width");
  s->add_option("--density", o.spec.density, "mask density target in (0,1]");
  s->add_option("--mask-kind", o.spec.mask_kind, "random | banded | lower_triangular | file");
  s->add_option("--mask-file", o.spec.mask_file, "mask file for --mask-kind file");
  s->add_option("--quant-bits", o.spec.quant_bits, "mask-path quantization width");
  s->add_option("--theta", o.spec.theta, "binarization threshold, 0 = 1/(2n)");
  s->add_option("--seed", o.spec.seed, "workload seed");
  s->add_option("--batches", o.spec.batch_count, "batches run back to back");
}

void add_hw_flags(CLI::App* s, Options& o) {
  s->add_option("--config", o.config_file, "hardware config file (key=value)");
  s->add_option("--set", o.overrides, "hardware override key=value (repeatable)");
}

HardwareConfig resolve_hw(const Options& o) {
  HardwareConfig hw = o.config_file.empty() ? HardwareConfig{} : load_config(o.config_file);
  for (const std::string& kv : o.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_kv(hw, kv.substr(0, eq), kv.substr(eq + 1));
  }
  hw.validate();
  return hw;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Mode flags are accepted case-insensitively; reports carry the canonical name.
CalculationMode cli_mode(const std::string& s) {
  for (CalculationMode m : all_modes())
    if (lower(s) == lower(mode_name(m))) return m;
  throw ConfigError("unknown mode '" + s + "' (CPSAA, ReBERT_like, ReTransformer_like, CPDAA)");
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw ConfigError("bad numeric list entry '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty numeric list");
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_doubles(csv)) out.push_back(static_cast<int>(v));
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << round_sig(v);
  return o.str();
}

void deliver(const std::string& text, const std::string& out) {
  if (out.empty())
    std::cout << text;
  else
    write_text_file(out, text);
}

// ---- subcommands -------------------------------------------------------------

int run_simulate(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  CalculationMode mode = cli_mode(o.mode);
  Workload w = synth_workload(o.spec);
  SimReport r;
  if (o.spec.batch_count > 1) {
    std::vector<Workload> batches(static_cast<size_t>(o.spec.batch_count), w);
    r = batch_driver(batches, mode, hw, {}, o.workers);
  } else {
    r = simulate_layer(w, mode, hw);
  }
  deliver(report_to_json_text(r), o.out);
  return 0;
}

int run_compare_modes(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  Workload w = synth_workload(o.spec);
  std::vector<SimReport> reports;
  for (CalculationMode m : all_modes()) reports.push_back(simulate_layer(w, m, hw));

  auto order_by = [&](auto key, bool ascending) {
    std::vector<size_t> idx = {0, 1, 2, 3};
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return ascending ? key(reports[a]) < key(reports[b]) : key(reports[a]) > key(reports[b]);
    });
    ordered_json names = ordered_json::array();
    for (size_t i : idx) names.push_back(reports[i].mode);
    return names;
  };

  ordered_json j;
  j["workload"] = workload_json(o.spec);
  j["config"] = config_json(hw);
  j["reports"] = ordered_json::array();
  for (const SimReport& r : reports) j["reports"].push_back(report_json(r));
  ordered_json ord;
  ord["total_ns_ascending"] = order_by([](const SimReport& r) { return r.total_ns; }, true);
  ord["w4w_ns_descending"] = order_by([](const SimReport& r) { return r.w4w_ns; }, false);
  ord["peak_parallel_arrays_descending"] =
      order_by([](const SimReport& r) { return (double)r.peak_parallel_arrays; }, false);
  ord["gops_descending"] = order_by([](const SimReport& r) { return r.gops; }, false);
  j["ordering"] = std::move(ord);

  std::cout << std::left << std::setw(20) << "mode" << std::right << std::setw(14) << "total_ns"
            << std::setw(12) << "w4w_ns" << std::setw(12) << "peak_arr" << std::setw(12) << "gops"
            << std::setw(14) << "gops_per_W" << std::setw(14) << "total_pj" << "\n";
  for (const SimReport& r : reports)
    std::cout << std::left << std::setw(20) << r.mode << std::right << std::setw(14)
              << fmt(r.total_ns) << std::setw(12) << fmt(r.w4w_ns) << std::setw(12)
              << r.peak_parallel_arrays << std::setw(12) << fmt(r.gops) << std::setw(14)
              << fmt(r.gops_per_watt) << std::setw(14) << fmt(r.energy.total_pj()) << "\n";

  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    for (const SimReport& r : reports)
      emit_report(r, (std::filesystem::path(o.out_dir) / (lower(r.mode) + ".json")).string());
  }
  if (!o.out.empty()) write_text_file(o.out, j.dump(2) + "\n");
  return 0;
}

int run_sweep(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  if (o.param != "density")
    throw ConfigError("sweep supports --param density, got '" + o.param + "'");
  std::vector<double> densities = parse_doubles(o.values);
  for (double d : densities)
    if (d <= 0.0 || d > 1.0) throw ConfigError("sweep density out of (0,1]: " + fmt(d));
  std::vector<int> xbs = parse_ints(o.xb_sizes);
  auto points = kernel_speedup_vs_density(o.spec.seq_len, o.spec.d, densities, hw, o.spec.seed,
                                          xbs);
  std::string csv = speedup_csv(points);
  if (!o.csv.empty())
    write_text_file(o.csv, csv);
  else if (o.out.empty())
    std::cout << csv;
  if (!o.out.empty()) {
    ordered_json j;
    j["param"] = o.param;
    j["n"] = o.spec.seq_len;
    j["d"] = o.spec.d;
    j["seed"] = o.spec.seed;
    j["xb_sizes"] = xbs;
    j["points"] = ordered_json::array();
    for (const auto& p : points) {
      ordered_json q;
      q["density"] = p.density;
      q["xb"] = p.xb;
      q["ddmm_cycles"] = p.ddmm_cycles;
      q["sddmm_cycles"] = p.sddmm_cycles;
      q["speedup"] = round_sig(p.speedup);
      j["points"].push_back(std::move(q));
    }
    write_text_file(o.out, j.dump(2) + "\n");
  }
  return 0;
}

int run_knob_study(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  CalculationMode mode = cli_mode(o.mode);
  Workload w = synth_workload(o.spec);
  auto rows = knob_study(w, mode, hw);
  std::cout << std::left << std::setw(16) << "knob" << std::right << std::setw(14) << "total_ns"
            << std::setw(12) << "gops" << std::setw(12) << "gain_pct" << "\n";
  for (const auto& r : rows)
    std::cout << std::left << std::setw(16) << r.knob << std::right << std::setw(14)
              << fmt(r.total_ns) << std::setw(12) << fmt(r.gops) << std::setw(12) << fmt(r.gain_pct)
              << "\n";
  if (!o.csv.empty()) write_text_file(o.csv, knob_csv(rows));
  if (!o.out.empty()) {
    ordered_json j;
    j["mode"] = mode_name(mode);
    j["workload"] = workload_json(o.spec);
    j["rows"] = ordered_json::array();
    for (const auto& r : rows) {
      ordered_json q;
      q["knob"] = r.knob;
      q["total_ns"] = round_sig(r.total_ns);
      q["gops"] = round_sig(r.gops);
      q["gain_pct"] = round_sig(r.gain_pct);
      j["rows"].push_back(std::move(q));
    }
    write_text_file(o.out, j.dump(2) + "\n");
  }
  return 0;
}

// The two worked scheduling examples plus one measured random point at the
// requested dimensions.
int run_kernel_bench(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  ordered_json j;

  {  // 4x4 scores, eight set bits, two per column, every column on its own group
    int n = 4, d = 64;
    MaskMatrix mask(n, n);
    for (int r = 0; r < n; r++) {
      mask.set(r, (r % 2) * 2, true);
      mask.set(r, (r % 2) * 2 + 1, true);
    }
    SplitMix64 rng(o.spec.seed);
    RealMatrix mr(n, d), xtr(d, n);
    for (double& v : mr.data) v = rng.next_signed_unit();
    for (double& v : xtr.data) v = rng.next_signed_unit();
    FixedPointMatrix m = extract_exponent(mr);
    FixedPointMatrix xt = extract_exponent(xtr);
    SddmmResult sp = sddmm(m, xt, mask, hw, 1);
    DdmmResult de = ddmm(m, xt, hw, 1);
    ordered_json q;
    q["n"] = n;
    q["d"] = d;
    q["mask_ones"] = mask.ones;
    q["max_col_nnz"] = mask_stats(mask).max_col_nnz;
    q["sddmm_cycles"] = sp.sched.cycles;
    q["ddmm_cycles"] = de.sched.cycles;
    j["worked_sddmm"] = std::move(q);
  }

  {  // cyclic band, 32 retained values per row: replicated vs stored-once V
    int n = 320, dv = 64, band = 32;
    MaskMatrix mask = banded_mask(n, band);
    SplitMix64 rng(o.spec.seed ^ 0x5851f42d4c957f2dULL);
    RealMatrix sr(n, n), vr(n, dv);
    for (int r = 0; r < n; r++)
      for (int c = 0; c < n; c++) sr.at(r, c) = mask.get(r, c) ? rng.next_signed_unit() : 0.0;
    for (double& v : vr.data) v = rng.next_signed_unit();
    FixedPointMatrix s = extract_exponent(sr);
    FixedPointMatrix v = extract_exponent(vr);
    SpmmResult repl = spmm(s, v, mask, hw, 1, 0);
    SpmmResult base = spmm_baseline(s, v, mask, hw, 1);
    ordered_json q;
    q["n"] = n;
    q["d_v"] = dv;
    q["row_nnz"] = band;
    q["spmm_cycles"] = repl.sched.cycles;
    q["spmm_arrays"] = repl.sched.arrays_used;
    q["baseline_cycles"] = base.sched.cycles;
    q["baseline_arrays"] = base.sched.arrays_used;
    q["time_ratio"] = round_sig((double)base.sched.cycles / (double)repl.sched.cycles);
    q["memory_ratio"] = round_sig((double)repl.sched.arrays_used / (double)base.sched.arrays_used);
    j["worked_spmm"] = std::move(q);
  }

  {  // measured point at the flag dimensions
    auto pts = kernel_speedup_vs_density(o.spec.seq_len, o.spec.d, {o.spec.density}, hw,
                                         o.spec.seed, {hw.xb_rows});
    const SpeedupPoint& p = pts.front();
    ordered_json q;
    q["n"] = o.spec.seq_len;
    q["d"] = o.spec.d;
    q["density"] = p.density;
    q["xb"] = p.xb;
    q["ddmm_cycles"] = p.ddmm_cycles;
    q["sddmm_cycles"] = p.sddmm_cycles;
    q["speedup"] = round_sig(p.speedup);
    j["random_point"] = std::move(q);
  }

  const auto& ws = j["worked_sddmm"];
  const auto& wp = j["worked_spmm"];
  std::cout << "worked sddmm: " << ws["sddmm_cycles"] << " cycles vs " << ws["ddmm_cycles"]
            << " dense\n";
  std::cout << "worked spmm:  " << wp["spmm_cycles"] << " cycle x " << wp["spmm_arrays"]
            << " arrays vs " << wp["baseline_cycles"] << " cycles x " << wp["baseline_arrays"]
            << " arrays (" << wp["time_ratio"] << "x time, " << wp["memory_ratio"]
            << "x memory)\n";
  std::cout << "random point: speedup " << j["random_point"]["speedup"] << " at density "
            << j["random_point"]["density"] << "\n";
  if (!o.out.empty()) write_text_file(o.out, j.dump(2) + "\n");
  return 0;
}

int run_encoder_stack(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  o.spec.validate();
  CalculationMode mode = cli_mode(o.mode);
  if (o.layers < 1) throw ConfigError("--layers must be >= 1");
  Workload w = synth_workload(o.spec);
  SimReport r = simulate_encoder_stack(w, o.layers, mode, hw);
  deliver(report_to_json_text(r), o.out);
  return 0;
}

int run_dump_config(const Options& o) {
  HardwareConfig hw = resolve_hw(o);
  deliver(dump_config(hw), o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossbar processing-in-memory sparse-attention simulator"};
  app.require_subcommand(1);
  Options o;

  CLI::App* simulate = app.add_subcommand("simulate", "one attention layer (or batch run)");
  add_workload_flags(simulate, o);
  add_hw_flags(simulate, o);
  simulate->add_option("--mode", o.mode, "CPSAA | ReBERT_like | ReTransformer_like | CPDAA");
  simulate->add_option("--workers", o.workers, "parallel batch workers");
  simulate->add_option("--out", o.out, "report file (stdout when omitted)");

  CLI::App* compare = app.add_subcommand("compare-modes", "all four modes on one workload");
  add_workload_flags(compare, o);
  add_hw_flags(compare, o);
  compare->add_option("--out", o.out, "combined comparison file");
  compare->add_option("--out-dir", o.out_dir, "directory for the four per-mode reports");

  CLI::App* sweep = app.add_subcommand("sweep", "score-kernel speedup across densities");
  add_workload_flags(sweep, o);
  add_hw_flags(sweep, o);
  sweep->add_option("--param", o.param, "swept parameter (density)");
  sweep->add_option("--values", o.values, "comma-separated sweep values");
  sweep->add_option("--xb-sizes", o.xb_sizes, "comma-separated crossbar sizes");
  sweep->add_option("--out", o.out, "JSON results file");
  sweep->add_option("--csv", o.csv, "CSV results file (stdout when omitted)");

  CLI::App* knobs = app.add_subcommand("knob-study", "ideal-situation latency knobs");
  add_workload_flags(knobs, o);
  add_hw_flags(knobs, o);
  knobs->add_option("--mode", o.mode, "calculation mode");
  knobs->add_option("--out", o.out, "JSON results file");
  knobs->add_option("--csv", o.csv, "CSV results file");

  CLI::App* bench = app.add_subcommand("kernel-bench", "worked kernel fixtures + one random point");
  add_workload_flags(bench, o);
  add_hw_flags(bench, o);
  bench->add_option("--out", o.out, "JSON results file");

  CLI::App* stack = app.add_subcommand("encoder-stack", "chained attention + FC encoders");
  add_workload_flags(stack, o);
  add_hw_flags(stack, o);
  stack->add_option("--mode", o.mode, "calculation mode");
  stack->add_option("--layers", o.layers, "encoder count");
  stack->add_option("--out", o.out, "report file (stdout when omitted)");

  CLI::App* dump = app.add_subcommand("dump-config", "resolved hardware config as key=value text");
  add_hw_flags(dump, o);
  dump->add_option("--out", o.out, "config file destination (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(simulate)) return run_simulate(o);
    if (app.got_subcommand(compare)) return run_compare_modes(o);
    if (app.got_subcommand(sweep)) return run_sweep(o);
    if (app.got_subcommand(knobs)) return run_knob_study(o);
    if (app.got_subcommand(bench)) return run_kernel_bench(o);
    if (app.got_subcommand(stack)) return run_encoder_stack(o);
    if (app.got_subcommand(dump)) return run_dump_config(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
