#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mssde/experiments.hpp"

namespace mssde::io {

/// Canonical JSON serialization: sorted keys, no whitespace, floats at 17
/// significant digits. Emitting, parsing, and emitting again is
/// byte-identical.
std::string dump_canonical_json(const nlohmann::json& j);

/// Report serialization. Wall times are zeroed unless the embedded config
/// asked for timing, so reports from repeated runs compare byte-identical.
std::string emit_report_json(const experiments::ConvergenceReport& report,
                             const nlohmann::json* model_spec = nullptr);
std::string emit_report_csv(const experiments::ConvergenceReport& report);

/// Dispatcher over the two formats ("json" or "csv").
std::string emit_report(const experiments::ConvergenceReport& report,
                        const std::string& format);

experiments::ConvergenceReport parse_report_json(const std::string& text);

/// Resolve the configured model, run the scenario, and write
/// <out_prefix>.json and <out_prefix>.csv.
experiments::ConvergenceReport run_scenario(const experiments::ScenarioConfig& config,
                                            const std::string& out_prefix);

}  // namespace mssde::io
