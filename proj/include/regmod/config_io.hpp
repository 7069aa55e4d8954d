// JSON configuration, run diagnostics and manifests. All emitted JSON uses
// canonical (alphabetical) key order and doubles rounded to 6 significant
// digits, so identical runs serialize byte-identically.
#pragma once

#include "regmod/engine.hpp"

#include <json.hpp>

#include <string>

namespace regmod {

constexpr const char* kToolVersion = "1.0.0";

// Round to 6 significant digits (diagnostics formatting contract).
double round_sig6(double x);

// Overlay JSON keys onto `base`. Unknown keys and type mismatches throw
// std::invalid_argument (treated as usage errors by the CLI). The schema is
// the exact key set produced by config_to_json.
RegConfig config_from_json(const nlohmann::json& j, RegConfig base);
RegConfig load_config(const std::string& path, RegConfig base);
nlohmann::json config_to_json(const RegConfig& cfg);

nlohmann::json direction_json(const DirectionResult& r);
nlohmann::json diagnostics_json(const RegResult& result, const RegConfig& cfg);

}  // namespace regmod
