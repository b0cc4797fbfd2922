#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cpsaa/kernels.hpp"
#include "cpsaa/mask.hpp"
#include "cpsaa/pipeline.hpp"

namespace cpsaa {

// Rounds to `digits` significant decimal digits. Every float in an emitted
// report passes through this so report files are byte-stable run to run.
double round_sig(double v, int digits = 6);

// ---- json views ----------------------------------------------------------

// Insertion-ordered objects so emitted key order matches the schema.
nlohmann::ordered_json workload_json(const WorkloadSpec& s);
nlohmann::ordered_json config_json(const HardwareConfig& hw);
WorkloadSpec workload_from_json(const nlohmann::ordered_json& j);
HardwareConfig config_from_json(const nlohmann::ordered_json& j);

// Full report object. energy.total_pj is emitted as the rounded sum of the
// rounded categories, so the ledger stays additive inside the file (to print
// precision). z and the raw timeline are deliberately not serialized.
nlohmann::ordered_json report_json(const SimReport& r);
SimReport report_from_json(const nlohmann::ordered_json& j);

std::string report_to_json_text(const SimReport& r);
SimReport parse_report(const std::string& json_text);  // throws FileError on bad text

// ---- files ---------------------------------------------------------------

// Atomic: writes a temp file in the destination directory and renames it, so
// a reader never observes a partial report. Throws FileError when the
// destination cannot be written.
void write_text_file(const std::string& path, const std::string& text);
void emit_report(const SimReport& r, const std::string& path);
SimReport load_report(const std::string& path);

// ---- csv tables ----------------------------------------------------------

// Plot-ready: one header line, one row per point.
std::string speedup_csv(const std::vector<SpeedupPoint>& points);
std::string knob_csv(const std::vector<KnobStudyRow>& rows);

}  // namespace cpsaa
