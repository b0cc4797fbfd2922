#include "cpsaa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "cpsaa/mask.hpp"

namespace cpsaa {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Streaming units (quantize, softmax, binarize) process this many values per
// tile per cycle.
constexpr int kUnitLanesPerTile = 32;

// Spread of the quantized pruning-path operands: two arrays per converter
// group keeps mask generation fast enough to hide under the score DDMM
// without hoarding groups the value path needs.
constexpr int kQuantSpread = 2;

// Weight replication factor of the parallel-projection mode: three copies of
// each projection weight let Q, K and V run concurrently at full rate.
constexpr int kProjectionSpread = 3;

// ---- event builder ----------------------------------------------------------

// Collects the dependency graph of one layer, then schedules it. Units,
// searches and transfers begin when their inputs are ready; writes and
// crossbar operations pass through the single controller in creation order,
// holding it for one dispatch slot per work unit (head-of-line blocking
// included). Execution starts when dispatch ends.
struct Builder {
  const HardwareConfig& hw;  // knob-adjusted view used for every cost
  IdealKnobs knobs;
  std::vector<TimelineEvent> ev;
  std::vector<double> exec_ns;
  EnergyLedger energy;
  int64_t attention_ops = 0;  // 2 * MACs of the attention-calculation kernels
  std::vector<KernelStat> stats;
  std::vector<std::string> warnings;

  Builder(const HardwareConfig& hw_in, const IdealKnobs& k) : hw(hw_in), knobs(k) {}

  int add(TimelineEvent e, double dur) {
    exec_ns.push_back(dur);
    ev.push_back(std::move(e));
    return static_cast<int>(ev.size()) - 1;
  }

  int transfer(const std::string& label, int64_t bits, std::vector<int> deps) {
    TransferCost c = transfer_cost(hw, bits);
    energy.transfer += c.energy_pj;
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Transfer;
    e.deps = std::move(deps);
    return add(std::move(e), knobs.zero_transfer ? 0.0 : c.latency_ns);
  }

  int unit(const std::string& label, int64_t values, double mw, std::vector<int> deps) {
    int64_t cycles = ceil_div(std::max<int64_t>(values, 1), int64_t{kUnitLanesPerTile} * hw.tiles);
    double dur = static_cast<double>(cycles) * hw.cycle_ns;
    energy.peripheral += mw * hw.tiles * dur;
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Unit;
    e.deps = std::move(deps);
    return add(std::move(e), dur);
  }

  int write(const std::string& label, const Placement& p, std::vector<int> deps) {
    WriteCost c = write_matrix(hw, p.rows, p.ag_count);
    energy.write += c.energy_pj;
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Write;
    e.deps = std::move(deps);
    e.dispatch_units = p.ag_count;  // one descriptor per written group
    e.ag_count = p.ag_count;
    e.spread = p.spread;
    e.arrays = p.arrays;
    e.placement = p.name;
    return add(std::move(e), knobs.zero_write ? 0.0 : c.latency_ns);
  }

  int vmm(const std::string& label, int64_t dispatch_units, int64_t cycles, int64_t arrays,
          int ag_count, int spread, const std::string& placement, bool attention,
          std::vector<int> deps) {
    energy += vmm_energy(hw, arrays, ag_count, cycles);
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Vmm;
    e.deps = std::move(deps);
    e.dispatch_units = dispatch_units;
    e.ag_count = ag_count;
    e.spread = spread;
    e.arrays = arrays;
    e.placement = placement;
    e.attention_calc = attention;
    return add(std::move(e), static_cast<double>(cycles) * hw.cycle_ns);
  }

  int cam_write(const std::string& label, int64_t rows, std::vector<int> deps) {
    double dur = static_cast<double>(rows) * hw.per_row_write_ns();
    energy.scheduler += hw.recam_mw * dur;
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Search;
    e.deps = std::move(deps);
    return add(std::move(e), dur);
  }

  int cam_search(const std::string& label, int64_t rows, int64_t passes,
                 std::vector<int> deps) {
    double dur = static_cast<double>(rows * passes) * hw.cycle_ns;
    energy.scheduler += hw.recam_mw * dur;
    TimelineEvent e;
    e.label = label;
    e.kind = TimelineEvent::Kind::Search;
    e.deps = std::move(deps);
    return add(std::move(e), dur);
  }

  void kernel_stat(const std::string& name, const ScheduleResult& s) {
    stats.push_back({name, s.cycles, s.arrays_used, s.effective_macs, s.replication_rows});
    attention_ops += 2 * s.effective_macs;
  }

  void manual_stat(const std::string& name, int64_t cycles, int64_t arrays, int64_t macs) {
    stats.push_back({name, cycles, arrays, macs, 0});
    attention_ops += 2 * macs;
  }

  void schedule() {
    double ctrl_free = 0.0;
    for (size_t i = 0; i < ev.size(); ++i) {
      TimelineEvent& e = ev[i];
      double ready = 0.0, ready_nw = 0.0;
      for (int d : e.deps) {
        ready = std::max(ready, ev[d].end_ns);
        if (ev[d].kind != TimelineEvent::Kind::Write)
          ready_nw = std::max(ready_nw, ev[d].end_ns);
      }
      e.ready_ns = ready;
      e.ready_nonwrite_ns = ready_nw;
      bool dispatched =
          e.kind == TimelineEvent::Kind::Write || e.kind == TimelineEvent::Kind::Vmm;
      if (dispatched) {
        double nominal = static_cast<double>(e.dispatch_units) * hw.ctrl_dispatch_ns;
        energy.peripheral += hw.ctrl_mw * nominal;  // dispatch work is spent either way
        e.dispatch_start_ns = std::max(ready, ctrl_free);
        e.dispatch_end_ns = e.dispatch_start_ns + (knobs.zero_ctrl ? 0.0 : nominal);
        ctrl_free = e.dispatch_end_ns;
      } else {
        e.dispatch_start_ns = e.dispatch_end_ns = ready;
      }
      e.start_ns = e.dispatch_end_ns;
      e.end_ns = e.start_ns + exec_ns[i];
    }
  }

  double total() const {
    double t = 0.0;
    for (const TimelineEvent& e : ev) t = std::max(t, e.end_ns);
    return t;
  }

  // Wait-for-write: per crossbar operation, the part of the span between its
  // non-write inputs being ready and its execution start that overlaps write
  // activity. A write this operation depends on blocks for its full dispatch
  // plus programming interval; an unrelated write blocks only while it holds
  // the controller.
  double w4w() const {
    double total_w4w = 0.0;
    for (const TimelineEvent& e : ev) {
      if (e.kind != TimelineEvent::Kind::Vmm) continue;
      double lo = e.ready_nonwrite_ns, hi = e.start_ns;
      if (hi <= lo) continue;
      std::vector<std::pair<double, double>> iv;
      for (size_t j = 0; j < ev.size(); ++j) {
        const TimelineEvent& wr = ev[j];
        if (wr.kind != TimelineEvent::Kind::Write) continue;
        bool dep = std::find(e.deps.begin(), e.deps.end(), static_cast<int>(j)) != e.deps.end();
        double a = std::max(wr.dispatch_start_ns, lo);
        double zz = std::min(dep ? wr.end_ns : wr.dispatch_end_ns, hi);
        if (zz > a) iv.emplace_back(a, zz);
      }
      std::sort(iv.begin(), iv.end());
      double cur_a = 0.0, cur_b = -1.0;
      for (auto [a, zz] : iv) {
        if (zz <= cur_b) continue;
        if (a > cur_b) {
          if (cur_b > cur_a) total_w4w += cur_b - cur_a;
          cur_a = a;
        }
        cur_b = zz;
      }
      if (cur_b > cur_a) total_w4w += cur_b - cur_a;
    }
    return total_w4w;
  }

  // Largest number of arrays converting at once across the concurrently
  // executing attention-calculation operations (each group keeps
  // min(adc_per_ag, spread) arrays converting; pruning-path operations and
  // writes are infrastructure, not attention parallelism).
  int64_t peak() const {
    std::vector<std::pair<double, int64_t>> deltas;
    for (const TimelineEvent& e : ev) {
      if (e.kind != TimelineEvent::Kind::Vmm || !e.attention_calc) continue;
      if (e.end_ns <= e.start_ns) continue;
      int64_t conv = static_cast<int64_t>(e.ag_count) *
                     std::min<int64_t>(hw.adc_per_ag, std::max(e.spread, 1));
      deltas.emplace_back(e.start_ns, conv);
      deltas.emplace_back(e.end_ns, -conv);
    }
    std::sort(deltas.begin(), deltas.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second < b.second;
              });
    int64_t cur = 0, best = 0;
    for (auto [t, d] : deltas) {
      cur += d;
      best = std::max(best, cur);
    }
    return best;
  }
};

struct BuildResult {
  FixedPointMatrix z;
  int mask_first = -1;  // event range of the mask-generation path
  int mask_last = -1;
};

// ---- CPSAA / CPDAA ----------------------------------------------------------

// The four-step dataflow: the quantized pruning path (step 1) runs beside the
// score and value DDMMs (step 2); the masked score kernel overlaps the value
// write (step 3); softmax feeds the masked value kernel (step 4). The dense
// variant runs the same graph with an all-ones kernel mask.
BuildResult build_cpsaa(Builder& b, const Workload& w, bool dense_scores) {
  const HardwareConfig& hw = b.hw;
  const WorkloadSpec& sp = w.spec;
  const int n = sp.seq_len, dm = sp.d_model, dv = sp.d_v;
  MaskMatrix kmask = dense_scores ? full_mask(n, n) : w.mask;

  Fabric fab(hw);
  const Placement p_ws = fab.place("W_S", operand_arrays(hw, dm, dm, 32),
                                   operand_rows(hw, dm, dm, 32), 0, Region::ROA);
  const Placement p_wv = fab.place("W_V", operand_arrays(hw, dm, dv, 32),
                                   operand_rows(hw, dm, dv, 32), 0, Region::ROA);
  const Placement p_wsq =
      fab.place("W_S_quant", operand_arrays(hw, dm, dm, sp.quant_bits),
                operand_rows(hw, dm, dm, sp.quant_bits), kQuantSpread, Region::ROA);
  const Placement p_xt = fab.place("Xt", operand_arrays(hw, dm, n, 32),
                                   operand_rows(hw, dm, n, 32), 0, Region::WEA);
  const Placement p_qxt =
      fab.place("Q_Xt", operand_arrays(hw, dm, n, sp.quant_bits),
                operand_rows(hw, dm, n, sp.quant_bits), kQuantSpread, Region::WEA);

  // numerics
  DdmmResult dd_m = ddmm(w.x, w.ws, hw, p_ws.spread);
  DdmmResult dd_v = ddmm(w.x, w.wv, hw, p_wv.spread);
  SddmmResult sd = sddmm(dd_m.c, fp_transpose(w.x), kmask, hw, p_xt.spread);
  FixedPointMatrix p_soft =
      masked_softmax_rows(sd.s, kmask, 1.0 / std::sqrt(static_cast<double>(sp.d)));

  // Value-side kernel selection: replicate V per output row when one wave
  // fits the free write-enabled arrays, otherwise store V once and stream.
  int64_t free_ags = fab.wea_free_ags();
  int64_t budget = free_ags * hw.arrays_per_ag;
  int64_t col_groups = ceil_div(dv, hw.numbers_per_row(32));
  int64_t repl_arrays = 0, repl_rows = 0;
  for (int i = 0; i < kmask.rows; ++i) {
    int64_t nnz = 0;
    for (int j = 0; j < kmask.cols; ++j) nnz += kmask.get(i, j);
    repl_arrays += col_groups * ceil_div(std::max<int64_t>(nnz, 0), hw.xb_rows);
    repl_rows += col_groups * nnz;
  }
  bool use_repl = repl_arrays > 0 && free_ags > 0 && repl_arrays <= budget;

  Placement p_v;
  SpmmResult spr;
  if (use_repl) {
    int spread_v = static_cast<int>(
        std::min<int64_t>(hw.arrays_per_ag, std::max<int64_t>(1, ceil_div(repl_arrays, free_ags))));
    p_v = fab.place("V_repl", repl_arrays, repl_rows, spread_v, Region::WEA);
    spr = spmm(p_soft, dd_v.c, kmask, hw, spread_v, budget);
  } else {
    int64_t store_arrays = operand_arrays(hw, n, dv, 32);
    int spread_v = static_cast<int>(std::min<int64_t>(
        hw.arrays_per_ag,
        std::max<int64_t>(1, ceil_div(store_arrays, std::max<int64_t>(free_ags, 1)))));
    p_v = fab.place("V_store", store_arrays, operand_rows(hw, n, dv, 32), spread_v,
                    Region::WEA);
    spr = spmm_baseline(p_soft, dd_v.c, kmask, hw, spread_v);
  }

  RecamSearchResult rs = recam_search(kmask);
  int64_t matches = static_cast<int64_t>(rs.matches.size());
  int64_t cam_passes = ceil_div(std::max(kmask.cols, 1), hw.recam_cols);
  if (n > hw.recam_banks * hw.recam_rows)
    b.warnings.push_back("mask rows exceed the scheduler CAM capacity; rows are staged in "
                         "multiple loads");

  // events, in controller dispatch order
  int t_in = b.transfer("transfer_in", static_cast<int64_t>(n) * dm * 32, {});
  int quant = b.unit("quantize_X", static_cast<int64_t>(n) * dm, hw.qu_mw, {t_in});
  int wxt = b.write("write_Xt", p_xt, {t_in});
  int v_m = b.vmm("vmm_M", n, dd_m.sched.cycles, dd_m.sched.arrays_used, dd_m.sched.ag_count,
                  p_ws.spread, p_ws.name, true, {t_in});
  b.kernel_stat("vmm_M", dd_m.sched);
  int v_v = b.vmm("vmm_V", n, dd_v.sched.cycles, dd_v.sched.arrays_used, dd_v.sched.ag_count,
                  p_wv.spread, p_wv.name, true, {t_in});
  b.kernel_stat("vmm_V", dd_v.sched);
  int wq = b.write("write_QXt", p_qxt, {quant});
  int v_qm = b.vmm("vmm_QM", n, dense_stream_cycles(hw, p_wsq.arrays, p_wsq.spread, n),
                   p_wsq.arrays, p_wsq.ag_count, p_wsq.spread, p_wsq.name, false, {quant});
  int v_qs = b.vmm("vmm_QS", n, dense_stream_cycles(hw, p_qxt.arrays, p_qxt.spread, n),
                   p_qxt.arrays, p_qxt.ag_count, p_qxt.spread, p_qxt.name, false, {v_qm, wq});
  int deq = b.unit("dequantize", static_cast<int64_t>(n) * n, hw.qu_mw, {v_qs});
  int msoft = b.unit("mask_softmax", static_cast<int64_t>(n) * n, hw.su_mw, {deq});
  int bin = b.unit("binarize", static_cast<int64_t>(n) * n, hw.su_mw, {msoft});
  int camw = b.cam_write("scheduler_write", n, {bin});
  int cams = b.cam_search("scheduler_search", n, cam_passes, {camw});
  int sd_ev = b.vmm("sddmm_S", matches, sd.sched.cycles, sd.sched.arrays_used,
                    sd.sched.ag_count, p_xt.spread, p_xt.name, true, {v_m, wxt, cams});
  b.kernel_stat("sddmm_S", sd.sched);
  std::vector<int> wv_deps = use_repl ? std::vector<int>{v_v, cams} : std::vector<int>{v_v};
  int wv = b.write("write_V", p_v, std::move(wv_deps));
  int soft = b.unit("softmax", kmask.ones, hw.su_mw, {sd_ev});
  int sp_ev = b.vmm("spmm_Z", matches, spr.sched.cycles, spr.sched.arrays_used,
                    spr.sched.ag_count, p_v.spread, p_v.name, true, {soft, wv});
  b.kernel_stat("spmm_Z", spr.sched);
  b.transfer("transfer_out", static_cast<int64_t>(n) * dv * 32, {sp_ev});

  for (const std::string& s : fab.warnings()) b.warnings.push_back(s);
  BuildResult r;
  r.z = std::move(spr.z);
  r.mask_first = quant;
  r.mask_last = cams;
  return r;
}

// ---- parallel-projection baseline ------------------------------------------

// Q, K and V projections run concurrently over replicated weights, then the
// runtime operands are written (no calculation may run beside the writes),
// and the dense score and value products stream over the stores.
BuildResult build_rebert(Builder& b, const Workload& w) {
  const HardwareConfig& hw = b.hw;
  const WorkloadSpec& sp = w.spec;
  const int n = sp.seq_len, dm = sp.d_model, d = sp.d, dv = sp.d_v;

  Fabric fab(hw);
  const Placement p_wq = fab.place("W_Q", operand_arrays(hw, dm, d, 32),
                                   operand_rows(hw, dm, d, 32), kProjectionSpread, Region::ROA);
  const Placement p_wk = fab.place("W_K", operand_arrays(hw, dm, d, 32),
                                   operand_rows(hw, dm, d, 32), kProjectionSpread, Region::ROA);
  const Placement p_wv = fab.place("W_V", operand_arrays(hw, dm, dv, 32),
                                   operand_rows(hw, dm, dv, 32), kProjectionSpread, Region::WEA);
  const Placement p_kt = fab.place("Kt_store", operand_arrays(hw, d, n, 32),
                                   operand_rows(hw, d, n, 32), 0, Region::WEA);
  const Placement p_vst = fab.place("V_store", operand_arrays(hw, n, dv, 32),
                                    operand_rows(hw, n, dv, 32), 0, Region::WEA);

  DdmmResult dq = ddmm(w.x, w.wq, hw, p_wq.spread);
  DdmmResult dk = ddmm(w.x, w.wk, hw, p_wk.spread);
  DdmmResult dv_r = ddmm(w.x, w.wv, hw, p_wv.spread);
  DdmmResult ds = ddmm(dq.c, fp_transpose(dk.c), hw, p_kt.spread);
  FixedPointMatrix p_soft =
      masked_softmax_rows(ds.c, full_mask(n, n), 1.0 / std::sqrt(static_cast<double>(d)));
  DdmmResult dz = ddmm(p_soft, dv_r.c, hw, p_vst.spread);

  int t_in = b.transfer("transfer_in", static_cast<int64_t>(n) * dm * 32, {});
  int vq = b.vmm("vmm_Q", n, dq.sched.cycles, dq.sched.arrays_used, dq.sched.ag_count,
                 p_wq.spread, p_wq.name, true, {t_in});
  b.kernel_stat("vmm_Q", dq.sched);
  int vk = b.vmm("vmm_K", n, dk.sched.cycles, dk.sched.arrays_used, dk.sched.ag_count,
                 p_wk.spread, p_wk.name, true, {t_in});
  b.kernel_stat("vmm_K", dk.sched);
  int vv = b.vmm("vmm_V", n, dv_r.sched.cycles, dv_r.sched.arrays_used, dv_r.sched.ag_count,
                 p_wv.spread, p_wv.name, true, {t_in});
  b.kernel_stat("vmm_V", dv_r.sched);
  // write-then-calculate: both stores wait for the compute phase to drain
  int wkt = b.write("write_Kt", p_kt, {vq, vk, vv});
  int wv = b.write("write_V", p_vst, {vq, vk, vv});
  int vs = b.vmm("vmm_S", n, ds.sched.cycles, ds.sched.arrays_used, ds.sched.ag_count,
                 p_kt.spread, p_kt.name, true, {vq, wkt, wv});
  b.kernel_stat("vmm_S", ds.sched);
  int soft = b.unit("softmax", static_cast<int64_t>(n) * n, hw.su_mw, {vs});
  int vz = b.vmm("vmm_Z", n, dz.sched.cycles, dz.sched.arrays_used, dz.sched.ag_count,
                 p_vst.spread, p_vst.name, true, {soft, wv});
  b.kernel_stat("vmm_Z", dz.sched);
  b.transfer("transfer_out", static_cast<int64_t>(n) * dv * 32, {vz});

  for (const std::string& s : fab.warnings()) b.warnings.push_back(s);
  BuildResult r;
  r.z = std::move(dz.c);
  return r;
}

// ---- serial-chain baseline --------------------------------------------------

// Fused-score dataflow without sparsity: X is written once and serves both
// score legs, and every product waits for the previous one, so the chain
// Q -> R -> S -> PX -> Z runs strictly in sequence.
BuildResult build_retransformer(Builder& b, const Workload& w) {
  const HardwareConfig& hw = b.hw;
  const WorkloadSpec& sp = w.spec;
  const int n = sp.seq_len, dm = sp.d_model, d = sp.d, dv = sp.d_v;

  Fabric fab(hw);
  const Placement p_wq = fab.place("W_Q", operand_arrays(hw, dm, d, 32),
                                   operand_rows(hw, dm, d, 32), 0, Region::ROA);
  const Placement p_wv = fab.place("W_V", operand_arrays(hw, dm, dv, 32),
                                   operand_rows(hw, dm, dv, 32), 0, Region::ROA);
  int64_t x_arrays = std::max(operand_arrays(hw, dm, n, 32), operand_arrays(hw, n, dm, 32));
  const Placement p_x =
      fab.place("X_store", x_arrays, operand_rows(hw, dm, n, 32), 0, Region::WEA);
  const Placement p_q = fab.place("Q_store", operand_arrays(hw, d, n, 32),
                                  operand_rows(hw, d, n, 32), 0, Region::WEA);

  DdmmResult dq = ddmm(w.x, w.wq, hw, p_wq.spread);
  FixedPointMatrix r_m = fp_matmul(fp_transpose(w.wk), fp_transpose(w.x));  // K^T, d x n
  FixedPointMatrix s_m = fp_matmul(dq.c, r_m);
  FixedPointMatrix p_soft =
      masked_softmax_rows(s_m, full_mask(n, n), 1.0 / std::sqrt(static_cast<double>(d)));
  FixedPointMatrix px_m = fp_matmul(p_soft, w.x);
  DdmmResult dz = ddmm(px_m, w.wv, hw, p_wv.spread);

  int t_in = b.transfer("transfer_in", static_cast<int64_t>(n) * dm * 32, {});
  int wx = b.write("write_X", p_x, {t_in});
  int vq = b.vmm("vmm_Q", n, dq.sched.cycles, dq.sched.arrays_used, dq.sched.ag_count,
                 p_wq.spread, p_wq.name, true, {t_in});
  b.kernel_stat("vmm_Q", dq.sched);
  int wq = b.write("write_Q", p_q, {vq});
  int vr = b.vmm("vmm_R", d, dense_stream_cycles(hw, p_x.arrays, p_x.spread, d), p_x.arrays,
                 p_x.ag_count, p_x.spread, p_x.name, true, {wx, vq});
  b.manual_stat("vmm_R", dense_stream_cycles(hw, p_x.arrays, p_x.spread, d), p_x.arrays,
                static_cast<int64_t>(d) * dm * n);
  int vs = b.vmm("vmm_S", n, dense_stream_cycles(hw, p_q.arrays, p_q.spread, n), p_q.arrays,
                 p_q.ag_count, p_q.spread, p_q.name, true, {vr, wq});
  b.manual_stat("vmm_S", dense_stream_cycles(hw, p_q.arrays, p_q.spread, n), p_q.arrays,
                static_cast<int64_t>(n) * d * n);
  int soft = b.unit("softmax", static_cast<int64_t>(n) * n, hw.su_mw, {vs});
  int vpx = b.vmm("vmm_PX", n, dense_stream_cycles(hw, p_x.arrays, p_x.spread, n), p_x.arrays,
                  p_x.ag_count, p_x.spread, p_x.name, true, {soft, wx});
  b.manual_stat("vmm_PX", dense_stream_cycles(hw, p_x.arrays, p_x.spread, n), p_x.arrays,
                static_cast<int64_t>(n) * n * dm);
  int vz = b.vmm("vmm_Z", n, dz.sched.cycles, dz.sched.arrays_used, dz.sched.ag_count,
                 p_wv.spread, p_wv.name, true, {vpx});
  b.kernel_stat("vmm_Z", dz.sched);
  b.transfer("transfer_out", static_cast<int64_t>(n) * dv * 32, {vz});

  for (const std::string& s : fab.warnings()) b.warnings.push_back(s);
  BuildResult r;
  r.z = std::move(dz.c);
  return r;
}

int64_t ops_of(const SimReport& r) {
  int64_t ops = 0;
  for (const KernelStat& k : r.kernel_stats) ops += 2 * k.effective_macs;
  return ops;
}

void finish_rates(SimReport& rep, int64_t ops) {
  rep.gops = rep.total_ns > 0 ? static_cast<double>(ops) / rep.total_ns : 0.0;
  double mw = rep.total_ns > 0 ? rep.energy.total_pj() / rep.total_ns : 0.0;
  rep.gops_per_watt = mw > 0 ? rep.gops / (mw / 1000.0) : 0.0;
}

}  // namespace

// ---- modes ----------------------------------------------------------------------

std::string mode_name(CalculationMode m) {
  switch (m) {
    case CalculationMode::CPSAA: return "CPSAA";
    case CalculationMode::ReBERT_like: return "ReBERT_like";
    case CalculationMode::ReTransformer_like: return "ReTransformer_like";
    case CalculationMode::CPDAA: return "CPDAA";
  }
  return "CPSAA";
}

CalculationMode parse_mode(const std::string& s) {
  for (CalculationMode m : all_modes())
    if (mode_name(m) == s) return m;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

std::vector<CalculationMode> all_modes() {
  return {CalculationMode::CPSAA, CalculationMode::ReBERT_like,
          CalculationMode::ReTransformer_like, CalculationMode::CPDAA};
}

// ---- entry points ---------------------------------------------------------------

SimReport simulate_layer(const Workload& w, CalculationMode mode, const HardwareConfig& hw_in,
                         const IdealKnobs& knobs) {
  hw_in.validate();
  w.spec.validate();

  SimReport rep;
  rep.mode = mode_name(mode);
  rep.seed = w.spec.seed;
  rep.workload = w.spec;
  rep.config = hw_in;
  if (w.spec.seq_len == 0) {
    rep.z = FixedPointMatrix(0, w.spec.d_v);
    return rep;
  }

  HardwareConfig hw = hw_in;
  if (knobs.infinite_adc) hw.adc_per_ag = hw.arrays_per_ag;

  Builder b(hw, knobs);
  BuildResult r;
  switch (mode) {
    case CalculationMode::CPSAA: r = build_cpsaa(b, w, false); break;
    case CalculationMode::CPDAA: r = build_cpsaa(b, w, true); break;
    case CalculationMode::ReBERT_like: r = build_rebert(b, w); break;
    case CalculationMode::ReTransformer_like: r = build_retransformer(b, w); break;
  }
  b.schedule();

  rep.total_ns = b.total();
  if (hw.include_static_power)
    b.energy.peripheral += hw.tiles * hw.tile_static_mw() * rep.total_ns;
  rep.energy = b.energy;
  rep.w4w_ns = b.w4w();
  rep.peak_parallel_arrays = b.peak();
  rep.kernel_stats = b.stats;
  rep.warnings = b.warnings;
  for (const TimelineEvent& e : b.ev) rep.steps.push_back({e.label, e.start_ns, e.end_ns});
  if (r.mask_first >= 0)
    rep.steps.push_back(
        {"mask_step", b.ev[r.mask_first].start_ns, b.ev[r.mask_last].end_ns});
  rep.z = std::move(r.z);
  rep.timeline = std::move(b.ev);
  finish_rates(rep, b.attention_ops);
  return rep;
}

SimReport simulate_encoder_stack(const Workload& w, int layers, CalculationMode mode,
                                 const HardwareConfig& hw_in, const IdealKnobs& knobs) {
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  const int n = w.spec.seq_len, dm = w.spec.d_model, dv = w.spec.d_v;

  HardwareConfig hw = hw_in;
  if (knobs.infinite_adc) hw.adc_per_ag = hw.arrays_per_ag;

  // The feed-forward projection back to d_model; one preloaded weight serves
  // every layer.
  SplitMix64 rng(w.spec.seed ^ 0x3c6ef372fe94f82aULL);
  RealMatrix wfc_r(dv, dm);
  for (double& v : wfc_r.data) v = rng.next_signed_unit();
  FixedPointMatrix wfc = extract_exponent(wfc_r);

  SimReport agg;
  agg.mode = mode_name(mode);
  agg.seed = w.spec.seed;
  agg.workload = w.spec;
  agg.config = hw_in;
  if (n == 0) {
    agg.z = FixedPointMatrix(0, dm);
    return agg;
  }

  int64_t fc_arrays = operand_arrays(hw, dv, dm, 32);
  int fc_ags = static_cast<int>(ceil_div(fc_arrays, hw.arrays_per_ag));

  Workload cur = w;
  double t = 0.0;
  int64_t ops = 0;
  for (int i = 0; i < layers; ++i) {
    SimReport lr = simulate_layer(cur, mode, hw_in, knobs);
    agg.steps.push_back({"layer_" + std::to_string(i), t, t + lr.total_ns});
    agg.energy += lr.energy;
    agg.w4w_ns += lr.w4w_ns;
    agg.peak_parallel_arrays = std::max(agg.peak_parallel_arrays, lr.peak_parallel_arrays);
    ops += ops_of(lr);
    t += lr.total_ns;

    DdmmResult fc = ddmm(lr.z, wfc, hw, 0);
    double fc_ns = (knobs.zero_ctrl ? 0.0 : n * hw.ctrl_dispatch_ns) +
                   static_cast<double>(fc.sched.cycles) * hw.cycle_ns;
    agg.energy += vmm_energy(hw, fc.sched.arrays_used, fc_ags, fc.sched.cycles);
    agg.energy.peripheral += hw.ctrl_mw * n * hw.ctrl_dispatch_ns;
    if (hw.include_static_power)
      agg.energy.peripheral += hw.tiles * hw.tile_static_mw() * fc_ns;
    ops += 2 * fc.sched.effective_macs;
    agg.steps.push_back({"fc_" + std::to_string(i), t, t + fc_ns});
    t += fc_ns;

    if (i == 0) {
      agg.kernel_stats = lr.kernel_stats;
      agg.kernel_stats.push_back({"fc", fc.sched.cycles, fc.sched.arrays_used,
                                  fc.sched.effective_macs, 0});
      agg.warnings = lr.warnings;
    }
    agg.z = std::move(fc.c);
    if (i + 1 < layers) cur.x = agg.z;
  }
  agg.total_ns = t;
  finish_rates(agg, ops);
  return agg;
}

SimReport batch_driver(const std::vector<Workload>& batches, CalculationMode mode,
                       const HardwareConfig& hw, const IdealKnobs& knobs, int workers) {
  SimReport agg;
  agg.mode = mode_name(mode);
  agg.config = hw;
  if (batches.empty()) return agg;
  agg.seed = batches.front().spec.seed;
  agg.workload = batches.front().spec;

  std::vector<SimReport> reps(batches.size());
  int use = std::max(1, std::min<int>(workers, static_cast<int>(batches.size())));
  if (use == 1) {
    for (size_t i = 0; i < batches.size(); ++i)
      reps[i] = simulate_layer(batches[i], mode, hw, knobs);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(use);
    for (int t = 0; t < use; ++t)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < batches.size(); i = next.fetch_add(1))
          reps[i] = simulate_layer(batches[i], mode, hw, knobs);
      });
    for (std::thread& th : pool) th.join();
  }

  double t = 0.0;
  int64_t ops = 0;
  for (size_t i = 0; i < reps.size(); ++i) {
    if (i > 0) {
      // staging hop: the next batch's activations land while the previous
      // result drains, costing one input transfer on the critical path
      const WorkloadSpec& sp = batches[i].spec;
      TransferCost hop =
          transfer_cost(hw, static_cast<int64_t>(sp.seq_len) * sp.d_model * 32);
      agg.energy.transfer += hop.energy_pj;
      double hop_ns = knobs.zero_transfer ? 0.0 : hop.latency_ns;
      agg.steps.push_back({"stage_" + std::to_string(i), t, t + hop_ns});
      t += hop_ns;
    }
    agg.steps.push_back({"batch_" + std::to_string(i), t, t + reps[i].total_ns});
    t += reps[i].total_ns;
    agg.energy += reps[i].energy;
    agg.w4w_ns += reps[i].w4w_ns;
    agg.peak_parallel_arrays = std::max(agg.peak_parallel_arrays, reps[i].peak_parallel_arrays);
    ops += ops_of(reps[i]);
  }
  agg.total_ns = t;
  agg.kernel_stats = reps.front().kernel_stats;
  agg.warnings = reps.front().warnings;
  agg.z = std::move(reps.back().z);
  finish_rates(agg, ops);
  return agg;
}

std::vector<KnobStudyRow> knob_study(const Workload& w, CalculationMode mode,
                                     const HardwareConfig& hw) {
  struct Case {
    const char* name;
    IdealKnobs k;
  };
  const Case cases[] = {
      {"baseline", {}},
      {"zero_write", {.zero_write = true}},
      {"zero_transfer", {.zero_transfer = true}},
      {"infinite_adc", {.infinite_adc = true}},
      {"zero_ctrl", {.zero_ctrl = true}},
      {"all", {.zero_write = true, .zero_transfer = true, .infinite_adc = true,
               .zero_ctrl = true}},
  };
  std::vector<KnobStudyRow> rows;
  double base_gops = 0.0;
  for (const Case& c : cases) {
    SimReport r = simulate_layer(w, mode, hw, c.k);
    KnobStudyRow row;
    row.knob = c.name;
    row.total_ns = r.total_ns;
    row.gops = r.gops;
    if (rows.empty()) base_gops = r.gops;
    row.gain_pct = base_gops > 0 ? (r.gops / base_gops - 1.0) * 100.0 : 0.0;
    rows.push_back(row);
  }
  return rows;
}

// ---- invariants -----------------------------------------------------------------

bool validate_timeline(const SimReport& report, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const double eps = 1e-6;
  const std::vector<TimelineEvent>& ev = report.timeline;

  double last_dispatch_end = 0.0;
  double max_end = 0.0;
  for (size_t i = 0; i < ev.size(); ++i) {
    const TimelineEvent& e = ev[i];
    double ready = 0.0;
    for (int d : e.deps) {
      if (d < 0 || d >= static_cast<int>(i))
        return fail("event '" + e.label + "' depends on a non-earlier event");
      ready = std::max(ready, ev[d].end_ns);
    }
    if (e.ready_ns < ready - eps || e.ready_ns > ready + eps)
      return fail("event '" + e.label + "' has inconsistent ready time");
    if (e.dispatch_start_ns < e.ready_ns - eps)
      return fail("event '" + e.label + "' dispatched before its inputs were ready");
    if (e.dispatch_end_ns < e.dispatch_start_ns - eps)
      return fail("event '" + e.label + "' has a negative dispatch window");
    if (std::abs(e.start_ns - e.dispatch_end_ns) > eps)
      return fail("event '" + e.label + "' does not start at dispatch end");
    if (e.end_ns < e.start_ns - eps)
      return fail("event '" + e.label + "' ends before it starts");
    bool dispatched =
        e.kind == TimelineEvent::Kind::Write || e.kind == TimelineEvent::Kind::Vmm;
    if (dispatched) {
      if (e.dispatch_start_ns < last_dispatch_end - eps)
        return fail("controller dispatch windows overlap at '" + e.label + "'");
      last_dispatch_end = e.dispatch_end_ns;
    }
    max_end = std::max(max_end, e.end_ns);
  }

  // A placement may not be programmed while an operation streams over it.
  for (const TimelineEvent& wr : ev) {
    if (wr.kind != TimelineEvent::Kind::Write) continue;
    for (const TimelineEvent& rd : ev) {
      if (rd.kind != TimelineEvent::Kind::Vmm || rd.placement != wr.placement) continue;
      if (rd.start_ns < wr.end_ns - eps && wr.start_ns < rd.end_ns - eps)
        return fail("write '" + wr.label + "' overlaps operation '" + rd.label +
                    "' on placement '" + wr.placement + "'");
    }
  }

  if (!ev.empty() && std::abs(report.total_ns - max_end) > eps)
    return fail("total_ns does not match the last event end");
  if (report.w4w_ns > report.total_ns + eps)
    return fail("w4w exceeds the total time");
  double cats = report.energy.vmm + report.energy.write + report.energy.adc +
                report.energy.dac + report.energy.transfer + report.energy.scheduler +
                report.energy.peripheral;
  if (std::abs(report.energy.total_pj() - cats) > 1e-9 * std::max(1.0, cats))
    return fail("energy ledger does not sum");
  return true;
}

}  // namespace cpsaa
