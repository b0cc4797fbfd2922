#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cpsaa/report.hpp"

using namespace cpsaa;
using nlohmann::ordered_json;

namespace {

const char* kReduced = " --seq-len 64 --d-model 128 --d 32 --d-v 32 --density 0.25 --seed 42";

std::string bin() {
  const char* b = std::getenv("CPSAA_SIM_BIN");
  REQUIRE_MESSAGE(b != nullptr, "CPSAA_SIM_BIN must point at the driver binary");
  return b;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  RunResult r;
  std::string cmd = bin() + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "cpsaa_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

}  // namespace

TEST_CASE("simulate smoke run prints a fully populated report") {
  RunResult r = run_cli(std::string("simulate") + kReduced);
  REQUIRE(r.code == 0);
  SimReport rep = parse_report(r.out);
  CHECK(rep.mode == "CPSAA");
  CHECK(rep.total_ns > 0);
  CHECK(rep.w4w_ns <= rep.total_ns);
  CHECK(rep.gops > 0);
  CHECK(rep.gops_per_watt > 0);
  CHECK(rep.peak_parallel_arrays > 0);
  CHECK(rep.energy.total_pj() > 0);
  CHECK(!rep.steps.empty());
  CHECK(!rep.kernel_stats.empty());
  CHECK(rep.workload.seq_len == 64);
}

TEST_CASE("identical flags give byte-identical output and modes parse case-insensitively") {
  std::string args = std::string("simulate") + kReduced;
  RunResult a = run_cli(args);
  RunResult b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  RunResult c = run_cli(std::string("simulate --mode cpdaa") + kReduced);
  REQUIRE(c.code == 0);
  CHECK(parse_report(c.out).mode == "CPDAA");
  RunResult d = run_cli(std::string("simulate --mode ReBERT_like") + kReduced);
  REQUIRE(d.code == 0);
  CHECK(parse_report(d.out).mode == "ReBERT_like");
}

TEST_CASE("--out writes a loadable report file") {
  auto out = scratch() / "simulate_out.json";
  std::filesystem::remove(out);
  RunResult r = run_cli(std::string("simulate") + kReduced + " --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  SimReport rep = load_report(out.string());
  CHECK(rep.total_ns > 0);
  CHECK(slurp(out).back() == '\n');
}

TEST_CASE("error classes map to distinct exit codes") {
  CHECK(run_cli("simulate --set bogus_key=1").code == 2);          // unknown config key
  CHECK(run_cli("simulate --set tiles=1").code == 3);              // capacity exceeded
  CHECK(run_cli("simulate --mask-kind file --mask-file /nonexistent.msk").code == 4);
  CHECK(run_cli("simulate --density 0").code == 2);
  CHECK(run_cli("simulate --density 1.5").code == 2);
  CHECK(run_cli("simulate --mode bogus").code == 2);
  CHECK(run_cli("bogus-subcommand").code == 2);
  CHECK(run_cli(std::string("simulate") + kReduced + " --out /nonexistent_dir_x/r.json").code ==
        4);
  CHECK(run_cli(std::string("encoder-stack --layers 0") + kReduced).code == 2);
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("dump-config text reloads to the identical config") {
  auto f1 = scratch() / "cfg1.txt";
  auto f2 = scratch() / "cfg2.txt";
  CHECK(run_cli("dump-config --set xb_rows=64 --set set_ns=1.75 --out " + f1.string()).code == 0);
  CHECK(run_cli("dump-config --config " + f1.string() + " --out " + f2.string()).code == 0);
  CHECK(slurp(f1) == slurp(f2));
  RunResult r = run_cli("dump-config --set xb_rows=64");
  CHECK(r.out.find("xb_rows = 64") != std::string::npos);
}

TEST_CASE("sweep emits a plot-ready csv with speedup falling as density rises") {
  RunResult r = run_cli("sweep --seq-len 64 --d 32 --seed 42 --values 0.25,0.5,1.0 --xb-sizes 32");
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "density,xb,ddmm_cycles,sddmm_cycles,speedup");
  std::vector<double> speedups;
  while (std::getline(in, line)) {
    size_t comma = line.rfind(',');
    speedups.push_back(std::stod(line.substr(comma + 1)));
  }
  REQUIRE(speedups.size() == 3);
  CHECK(speedups[0] >= speedups[1]);
  CHECK(speedups[1] >= speedups[2]);
  CHECK(speedups[2] == 1.0);  // dense mask gains nothing
  CHECK(run_cli("sweep --param xb --values 1,2").code == 2);
  CHECK(run_cli("sweep --values 0,0.5").code == 2);
}

TEST_CASE("compare-modes prints the table and emits four reports") {
  auto out = scratch() / "cmp.json";
  auto dir = scratch() / "cmp_reports";
  RunResult r = run_cli(std::string("compare-modes") + kReduced + " --out " + out.string() +
                        " --out-dir " + dir.string());
  REQUIRE(r.code == 0);
  for (const char* name : {"CPSAA", "ReBERT_like", "ReTransformer_like", "CPDAA"})
    CHECK(r.out.find(name) != std::string::npos);
  ordered_json j = ordered_json::parse(slurp(out));
  REQUIRE(j["reports"].size() == 4);
  CHECK(j["ordering"]["total_ns_ascending"].size() == 4);
  CHECK(report_from_json(j["reports"][0]).mode == "CPSAA");
  for (const char* f : {"cpsaa.json", "rebert_like.json", "retransformer_like.json", "cpdaa.json"})
    CHECK(load_report((dir / f).string()).total_ns > 0);
}

TEST_CASE("worker count does not change the merged batch report") {
  auto a = scratch() / "w1.json";
  auto b = scratch() / "w4.json";
  std::string base = std::string("simulate --batches 3") + kReduced;
  CHECK(run_cli(base + " --workers 1 --out " + a.string()).code == 0);
  CHECK(run_cli(base + " --workers 4 --out " + b.string()).code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("encoder-stack chains layers and reports per-layer steps") {
  RunResult r = run_cli(std::string("encoder-stack --layers 2") + kReduced);
  REQUIRE(r.code == 0);
  SimReport rep = parse_report(r.out);
  CHECK(rep.mode == "CPSAA");
  bool has_fc1 = false;
  for (const auto& s : rep.steps) has_fc1 = has_fc1 || s.label == "fc_1";
  CHECK(has_fc1);
}

TEST_CASE("knob-study csv lists the baseline first and all six rows") {
  auto f = scratch() / "knobs.csv";
  CHECK(run_cli(std::string("knob-study") + kReduced + " --csv " + f.string()).code == 0);
  std::istringstream in(slurp(f));
  std::string line;
  std::getline(in, line);
  CHECK(line == "knob,total_ns,gops,gain_pct");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].rfind("baseline,", 0) == 0);
}
