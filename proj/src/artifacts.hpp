#pragma once

#include <string>

#include "pipeline.hpp"

namespace dobs {

// Gains file: everything needed to reproduce and re-check a design without
// re-running placement. Matrices are stored with explicit dimensions so
// empty blocks (fully observed or fully blind agents) round-trip.
std::string design_to_json(const Design& design);

// Parses a gains file against a scenario, rebuilds the stacked model from
// the stored decompositions and gains, and re-runs the certificate battery.
// Structural mismatches throw; value-level tampering surfaces as failing
// certificate lines.
Design design_from_json(const ScenarioConfig& cfg, const std::string& text);

Design load_design_file(const ScenarioConfig& cfg, const std::string& path);

// Certificate report, one line per check, stable field names.
std::string report_to_text(const Design& design, const ScenarioConfig& cfg);

// Same line format for a verification result (certificates plus
// simulation-backed checks).
std::string verify_report_to_text(const CertificateSuite& suite, bool pass);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace dobs
