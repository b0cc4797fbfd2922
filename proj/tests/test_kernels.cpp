#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpsaa/kernels.hpp"
#include "test_util.hpp"

using namespace cpsaa;

namespace {

MaskMatrix fixture_mask() {
  // Every key column retained by exactly two query rows.
  MaskMatrix m(4, 4);
  const char* rows[4] = {"1100", "0110", "1001", "0011"};
  for (int r = 0; r < 4; r++)
    for (int c = 0; c < 4; c++)
      if (rows[r][c] == '1') m.set(r, c, true);
  return m;
}

HardwareConfig single_array_groups() {
  HardwareConfig hw;
  hw.arrays_per_ag = 1;
  hw.adc_per_ag = 1;
  return hw;
}

}  // namespace

TEST_CASE("sampled product converts each column once per retained row") {
  HardwareConfig hw = single_array_groups();
  MaskMatrix mask = fixture_mask();
  FixedPointMatrix m = extract_exponent(testutil::random_real(4, 32, 1));
  FixedPointMatrix xt = extract_exponent(testutil::random_real(32, 4, 2));

  SddmmResult sparse = sddmm(m, xt, mask, hw);
  DdmmResult dense = ddmm(m, xt, hw);

  CHECK(sparse.sched.cycles == 2);  // max column population
  CHECK(dense.sched.cycles == 4);   // every row streams
  CHECK(sparse.sched.arrays_used == 4);
  CHECK(sparse.sched.ag_count == 4);
  CHECK(sparse.sched.effective_macs == 8 * 32);

  // On-mask scores agree with the dense product; off-mask entries are hard zeros.
  RealMatrix want = to_real(dense.c);
  RealMatrix got = to_real(sparse.s);
  for (int r = 0; r < 4; r++)
    for (int c = 0; c < 4; c++) {
      if (mask.get(r, c))
        CHECK(std::fabs(got.at(r, c) - want.at(r, c)) <= 1e-8);
      else
        CHECK(sparse.s.at(r, c) == 0);
    }
}

TEST_CASE("sampled product with an empty mask is free") {
  HardwareConfig hw = single_array_groups();
  FixedPointMatrix m = extract_exponent(testutil::random_real(4, 32, 3));
  FixedPointMatrix xt = extract_exponent(testutil::random_real(32, 4, 4));
  SddmmResult r = sddmm(m, xt, MaskMatrix(4, 4), hw);
  CHECK(r.sched.cycles == 0);
  CHECK(r.s.exponent == 0);
  for (int32_t v : r.s.frac) CHECK(v == 0);
}

TEST_CASE("column sharing merges row sets instead of double counting") {
  // 64-wide crossbars fit two 32-bit values per row, so neighbouring columns
  // share an array; a row retained by both columns converts once, not twice.
  HardwareConfig hw = single_array_groups();
  hw.xb_rows = 64;
  hw.xb_cols = 64;
  MaskMatrix mask(2, 2);
  mask.set(0, 0, true);
  mask.set(0, 1, true);  // same row in both columns
  mask.set(1, 1, true);
  FixedPointMatrix m = extract_exponent(testutil::random_real(2, 8, 5));
  FixedPointMatrix xt = extract_exponent(testutil::random_real(8, 2, 6));
  SddmmResult r = sddmm(m, xt, mask, hw);
  CHECK(r.sched.arrays_used == 1);
  CHECK(r.sched.cycles == 2);  // rows {0,1}, not 3 column hits
}

TEST_CASE("replicated sparse product fires once per output row") {
  HardwareConfig hw = single_array_groups();
  MaskMatrix mask = fixture_mask();
  FixedPointMatrix s = extract_exponent(testutil::random_real(4, 4, 7));
  // Zero the masked-out scores so the integrity gate passes.
  for (int r = 0; r < 4; r++)
    for (int c = 0; c < 4; c++)
      if (!mask.get(r, c)) s.at(r, c) = 0;
  FixedPointMatrix v = extract_exponent(testutil::random_real(4, 32, 8));

  SpmmResult rep = spmm(s, v, mask, hw);
  CHECK(rep.sched.cycles == 1);
  CHECK(rep.sched.arrays_used == 4 * 32);  // 32 column arrays per output row
  CHECK(rep.sched.replication_rows == 8);
  CHECK(rep.sched.effective_macs == 8 * 32);
  CHECK(rep.sched.utilization == 1.0);
  CHECK(rep.sched.waves == 1);
}

TEST_CASE("replicated and baseline sparse products are bit-identical") {
  HardwareConfig hw;
  for (uint64_t seed = 0; seed < 5; seed++) {
    MaskMatrix mask = random_mask(12, 12, 0.4, 900 + seed);
    FixedPointMatrix s = extract_exponent(testutil::random_real(12, 12, 10 + seed));
    for (int r = 0; r < 12; r++)
      for (int c = 0; c < 12; c++)
        if (!mask.get(r, c)) s.at(r, c) = 0;
    FixedPointMatrix v = extract_exponent(testutil::random_real(12, 8, 20 + seed));

    SpmmResult a = spmm(s, v, mask, hw);
    SpmmResult b = spmm_baseline(s, v, mask, hw);
    CHECK(a.z.exponent == b.z.exponent);
    CHECK(a.z.frac == b.z.frac);
  }
}

TEST_CASE("integrity gate rejects scores outside the mask") {
  HardwareConfig hw;
  MaskMatrix mask = fixture_mask();
  FixedPointMatrix s = extract_exponent(testutil::random_real(4, 4, 30));  // dense scores
  FixedPointMatrix v = extract_exponent(testutil::random_real(4, 8, 31));
  CHECK_THROWS_AS(spmm(s, v, mask, hw), std::invalid_argument);
  CHECK_THROWS_AS(spmm_baseline(s, v, mask, hw), std::invalid_argument);
}

TEST_CASE("replication waves split on the array budget") {
  HardwareConfig hw = single_array_groups();
  MaskMatrix mask = fixture_mask();
  FixedPointMatrix s = extract_exponent(testutil::random_real(4, 4, 33));
  for (int r = 0; r < 4; r++)
    for (int c = 0; c < 4; c++)
      if (!mask.get(r, c)) s.at(r, c) = 0;
  FixedPointMatrix v = extract_exponent(testutil::random_real(4, 32, 34));

  SpmmResult one = spmm(s, v, mask, hw);          // 128 arrays fit
  SpmmResult two = spmm(s, v, mask, hw, 0, 64);   // two rows per wave
  CHECK(one.sched.waves == 1);
  CHECK(two.sched.waves == 2);
  CHECK(two.sched.cycles == 2 * one.sched.cycles);
  CHECK(two.sched.ag_count == 64);
  CHECK(two.z.frac == one.z.frac);  // waves change timing, never values
  // A single row needs 32 arrays; a budget below that cannot run at all.
  CHECK_THROWS_AS(spmm(s, v, mask, hw, 0, 16), CapacityError);
}

TEST_CASE("band that retains 32 keys per row: replication is 320x faster at 32x arrays") {
  HardwareConfig hw;
  hw.adc_per_ag = hw.arrays_per_ag;  // private converter per array
  const int n = 320, d_v = 64;
  MaskMatrix mask = banded_mask(n, 32);
  FixedPointMatrix s = extract_exponent(testutil::random_real(n, n, 40));
  for (int r = 0; r < n; r++)
    for (int c = 0; c < n; c++)
      if (!mask.get(r, c)) s.at(r, c) = 0;
  FixedPointMatrix v = extract_exponent(testutil::random_real(n, d_v, 41));

  SpmmResult rep = spmm(s, v, mask, hw);
  SpmmResult base = spmm_baseline(s, v, mask, hw);

  CHECK(rep.sched.cycles == 1);
  CHECK(base.sched.cycles == n);
  CHECK(rep.sched.arrays_used == int64_t{n} * d_v);     // 20480 replicated arrays
  CHECK(base.sched.arrays_used == 640);                 // V stored once
  CHECK(rep.sched.arrays_used == 32 * base.sched.arrays_used);
  CHECK(base.sched.utilization == doctest::Approx(0.1));
  CHECK(rep.z.frac == base.z.frac);
}

TEST_CASE("dense kernel matches fp_matmul bit for bit") {
  HardwareConfig hw;
  FixedPointMatrix a = extract_exponent(testutil::random_real(5, 64, 50));
  FixedPointMatrix b = extract_exponent(testutil::random_real(64, 20, 51));
  DdmmResult r = ddmm(a, b, hw);
  FixedPointMatrix want = fp_matmul(a, b);
  CHECK(r.c.exponent == want.exponent);
  CHECK(r.c.frac == want.frac);
  // 20 column groups x 2 chain arrays = 40 arrays -> 4 packed groups; the
  // full groups funnel 12 queues of 5 through one converter.
  CHECK(r.sched.arrays_used == 40);
  CHECK(r.sched.ag_count == 4);
  CHECK(r.sched.cycles == 60);
  CHECK(r.sched.effective_macs == 5LL * 64 * 20);
}

TEST_CASE("masked speedup falls as density or crossbar size grows") {
  HardwareConfig hw;
  auto points = kernel_speedup_vs_density(64, 32, {0.1, 0.3}, hw, 7, {32, 64});
  REQUIRE(points.size() == 4);
  auto at = [&](int xb, double den) {
    for (const auto& p : points)
      if (p.xb == xb && p.density == den) return p;
    throw std::logic_error("missing point");
  };
  CHECK(at(32, 0.1).speedup > at(32, 0.3).speedup);
  CHECK(at(64, 0.1).speedup > at(64, 0.3).speedup);
  CHECK(at(32, 0.1).speedup > at(64, 0.1).speedup);
  CHECK(at(32, 0.1).ddmm_cycles == at(32, 0.3).ddmm_cycles);  // dense cost is mask-free
}
