#pragma once

#include <string>

#include "lptd/simnet.hpp"

namespace lptd {

// Scenario files are strict JSON: unknown keys are configuration errors, not
// warnings. The canonical serialization materializes every default so the
// digest is stable across equivalent spellings.

ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig scenario_from_file(const std::string& path);

std::string scenario_canonical_json(const ScenarioConfig& cfg);
std::string scenario_digest(const ScenarioConfig& cfg);  // sha256 hex of the canonical form

// CLI-level validation: rejects fault schedules outside fault-tolerant mode,
// replay targets without a prior report, out-of-range indices.
void validate_scenario(const ScenarioConfig& cfg);

}  // namespace lptd
