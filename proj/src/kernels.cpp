#include "cpsaa/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace cpsaa {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

int effective_spread(const HardwareConfig& hw, int spread) {
  return spread > 0 ? std::min(spread, hw.arrays_per_ag) : hw.arrays_per_ag;
}

// Arrays of column group g sit at indices g*chains .. g*chains+chains-1 and
// carry that group's queue; `spread` consecutive arrays share a group of
// converters.
std::vector<std::vector<int64_t>> layout_queues(const std::vector<int64_t>& group_q,
                                                int64_t chains, int spread) {
  int64_t arrays = static_cast<int64_t>(group_q.size()) * chains;
  std::vector<std::vector<int64_t>> out(static_cast<size_t>(ceil_div(arrays, spread)));
  for (int64_t a = 0; a < arrays; a++)
    out[a / spread].push_back(group_q[a / chains]);
  return out;
}

uint64_t splitmix(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RealMatrix random_operand(int rows, int cols, uint64_t seed) {
  RealMatrix m(rows, cols);
  uint64_t state = seed;
  for (double& v : m.data)
    v = static_cast<double>(splitmix(state) >> 11) * (1.0 / 4503599627370496.0) - 1.0;
  return m;
}

}  // namespace

SddmmResult sddmm(const FixedPointMatrix& m, const FixedPointMatrix& xt,
                  const MaskMatrix& mask, const HardwareConfig& hw, int spread) {
  if (m.rows != mask.rows || xt.cols != mask.cols || m.cols != xt.rows)
    throw std::invalid_argument("sddmm: operand/mask shapes disagree");
  const int spr = effective_spread(hw, spread);
  const int npr = hw.numbers_per_row(32);
  const int64_t chains = ceil_div(xt.rows, hw.xb_rows);
  const int64_t groups = ceil_div(xt.cols, npr);

  // A column converts once per retained row of its mask column; columns
  // sharing an array convert together, so their row sets merge.
  std::vector<int64_t> group_q(static_cast<size_t>(groups), 0);
  for (int64_t g = 0; g < groups; g++) {
    const int c0 = static_cast<int>(g) * npr;
    const int c1 = std::min(mask.cols, c0 + npr);
    int64_t q = 0;
    for (int r = 0; r < mask.rows; r++)
      for (int c = c0; c < c1; c++)
        if (mask.get(r, c)) {
          q++;
          break;
        }
    group_q[static_cast<size_t>(g)] = q;
  }

  SddmmResult out;
  out.sched.kernel = "sddmm";
  out.sched.ag_queues = layout_queues(group_q, chains, spr);
  out.sched.cycles = vmm_cycles(hw, out.sched.ag_queues);
  out.sched.wave_cycles = {out.sched.cycles};
  out.sched.arrays_used = groups * chains;
  out.sched.ag_count = static_cast<int>(out.sched.ag_queues.size());
  out.sched.effective_macs = mask.ones * m.cols;

  std::vector<int64_t> acc(static_cast<size_t>(m.rows) * mask.cols, 0);
  for (int r = 0; r < mask.rows; r++)
    for (int c = 0; c < mask.cols; c++) {
      if (!mask.get(r, c)) continue;
      int64_t sum = 0;
      for (int k = 0; k < m.cols; k++)
        sum += round_shift(static_cast<int64_t>(m.at(r, k)) * xt.at(k, c), 31);
      acc[static_cast<size_t>(r) * mask.cols + c] = sum;
    }
  out.s = fp_from_acc(acc, m.rows, mask.cols, m.exponent + xt.exponent);
  return out;
}

namespace {

// Shared by both sparse-dense variants: accumulate Z[alpha,:] over the
// retained beta set in ascending order. The baseline streams every beta, but
// off-mask scores are exact zeros whose products round-shift to zero, so
// skipping them is bit-exact.
FixedPointMatrix masked_gather_product(const FixedPointMatrix& s, const FixedPointMatrix& v,
                                       const std::vector<RowMatch>& matches, int n_rows) {
  std::vector<int64_t> acc(static_cast<size_t>(n_rows) * v.cols, 0);
  for (const RowMatch& match : matches) {
    int64_t* row = &acc[static_cast<size_t>(match.alpha) * v.cols];
    for (int beta : match.betas) {
      const int64_t sv = s.at(match.alpha, beta);
      if (sv == 0) continue;
      const int32_t* vrow = &v.frac[static_cast<size_t>(beta) * v.cols];
      for (int j = 0; j < v.cols; j++) row[j] += round_shift(sv * vrow[j], 31);
    }
  }
  return fp_from_acc(acc, n_rows, v.cols, s.exponent + v.exponent);
}

void check_integrity(const FixedPointMatrix& s, const MaskMatrix& mask, const char* who) {
  if (s.rows != mask.rows || s.cols != mask.cols)
    throw std::invalid_argument(std::string(who) + ": score/mask shapes disagree");
  for (int r = 0; r < s.rows; r++)
    for (int c = 0; c < s.cols; c++)
      if (!mask.get(r, c) && s.at(r, c) != 0)
        throw std::invalid_argument(std::string(who) +
                                    ": score matrix has nonzeros outside the mask");
}

}  // namespace

SpmmResult spmm(const FixedPointMatrix& s, const FixedPointMatrix& v, const MaskMatrix& mask,
                const HardwareConfig& hw, int spread, int64_t array_budget) {
  check_integrity(s, mask, "spmm");
  if (v.rows != mask.cols) throw std::invalid_argument("spmm: V row count must match mask width");
  const int spr = effective_spread(hw, spread);
  const int npr = hw.numbers_per_row(32);
  const int64_t col_groups = ceil_div(v.cols, npr);
  const int64_t budget = array_budget > 0 ? array_budget : hw.wea_arrays();

  RecamSearchResult found = recam_search(mask);

  SpmmResult out;
  out.sched.kernel = "spmm";
  out.sched.replication_rows = mask.ones;
  out.sched.effective_macs = mask.ones * v.cols;

  // Pack output rows into capacity waves; each row needs a private block of
  // ceil(nnz / xb_rows) chained arrays per column group and converts once.
  int64_t wave_arrays = 0;
  std::vector<int64_t> wave_sizes;
  for (const RowMatch& match : found.matches) {
    const int64_t arr =
        col_groups * ceil_div(static_cast<int64_t>(match.betas.size()), hw.xb_rows);
    if (arr > budget)
      throw CapacityError("spmm: one output row needs " + std::to_string(arr) +
                          " replicated arrays; budget is " + std::to_string(budget));
    if (wave_arrays + arr > budget) {
      wave_sizes.push_back(wave_arrays);
      wave_arrays = 0;
    }
    wave_arrays += arr;
    out.sched.arrays_used += arr;
  }
  if (wave_arrays > 0) wave_sizes.push_back(wave_arrays);

  int64_t peak = 0;
  for (size_t w = 0; w < wave_sizes.size(); w++) {
    std::vector<int64_t> ones(static_cast<size_t>(wave_sizes[w]), 1);
    auto queues = layout_queues(ones, 1, spr);
    int64_t c = vmm_cycles(hw, queues);
    out.sched.wave_cycles.push_back(c);
    out.sched.cycles += c;
    peak = std::max(peak, wave_sizes[w]);
    if (w == 0) out.sched.ag_queues = std::move(queues);
  }
  out.sched.waves = std::max<int>(1, static_cast<int>(wave_sizes.size()));
  out.sched.ag_count = static_cast<int>(ceil_div(peak, spr));

  out.z = masked_gather_product(s, v, found.matches, mask.rows);
  return out;
}

SpmmResult spmm_baseline(const FixedPointMatrix& s, const FixedPointMatrix& v,
                         const MaskMatrix& mask, const HardwareConfig& hw, int spread) {
  check_integrity(s, mask, "spmm_baseline");
  if (v.rows != mask.cols)
    throw std::invalid_argument("spmm_baseline: V row count must match mask width");
  const int spr = effective_spread(hw, spread);
  const int npr = hw.numbers_per_row(32);
  const int64_t chains = ceil_div(v.rows, hw.xb_rows);
  const int64_t groups = ceil_div(v.cols, npr);

  // V is stored once; every score row streams through the whole store.
  std::vector<int64_t> group_q(static_cast<size_t>(groups), mask.rows);

  SpmmResult out;
  out.sched.kernel = "spmm_baseline";
  out.sched.ag_queues = layout_queues(group_q, chains, spr);
  out.sched.cycles = vmm_cycles(hw, out.sched.ag_queues);
  out.sched.wave_cycles = {out.sched.cycles};
  out.sched.arrays_used = groups * chains;
  out.sched.ag_count = static_cast<int>(out.sched.ag_queues.size());
  out.sched.effective_macs = mask.ones * v.cols;
  out.sched.utilization = mask.density();  // useful fraction of streamed inputs

  out.z = masked_gather_product(s, v, recam_search(mask).matches, mask.rows);
  return out;
}

DdmmResult ddmm(const FixedPointMatrix& a, const FixedPointMatrix& b, const HardwareConfig& hw,
                int spread) {
  const int spr = effective_spread(hw, spread);
  const int npr = hw.numbers_per_row(32);
  const int64_t chains = ceil_div(b.rows, hw.xb_rows);
  const int64_t groups = ceil_div(b.cols, npr);
  std::vector<int64_t> group_q(static_cast<size_t>(groups), a.rows);

  DdmmResult out;
  out.sched.kernel = "ddmm";
  out.sched.ag_queues = layout_queues(group_q, chains, spr);
  out.sched.cycles = vmm_cycles(hw, out.sched.ag_queues);
  out.sched.wave_cycles = {out.sched.cycles};
  out.sched.arrays_used = groups * chains;
  out.sched.ag_count = static_cast<int>(out.sched.ag_queues.size());
  out.sched.effective_macs = static_cast<int64_t>(a.rows) * a.cols * b.cols;
  out.c = fp_matmul(a, b);
  return out;
}

int64_t dense_stream_cycles(const HardwareConfig& hw, int64_t arrays, int spread,
                            int64_t issues) {
  std::vector<int64_t> group_q(static_cast<size_t>(arrays), issues);
  return vmm_cycles(hw, layout_queues(group_q, 1, effective_spread(hw, spread)));
}

std::vector<SpeedupPoint> kernel_speedup_vs_density(int n, int d,
                                                    const std::vector<double>& densities,
                                                    const HardwareConfig& hw, uint64_t seed,
                                                    const std::vector<int>& xb_sizes) {
  FixedPointMatrix m = extract_exponent(random_operand(n, d, seed));
  FixedPointMatrix xt = extract_exponent(random_operand(d, n, seed + 1));

  std::vector<SpeedupPoint> out;
  for (int xb : xb_sizes) {
    HardwareConfig cur = hw;
    cur.xb_rows = xb;
    cur.xb_cols = xb;
    for (size_t i = 0; i < densities.size(); i++) {
      MaskMatrix mask = random_mask(n, n, densities[i], seed + 100 + i);
      SpeedupPoint p;
      p.density = densities[i];
      p.xb = xb;
      p.ddmm_cycles = ddmm(m, xt, cur).sched.cycles;
      p.sddmm_cycles = sddmm(m, xt, mask, cur).sched.cycles;
      p.speedup = p.sddmm_cycles > 0
                      ? static_cast<double>(p.ddmm_cycles) / static_cast<double>(p.sddmm_cycles)
                      : 0.0;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace cpsaa
