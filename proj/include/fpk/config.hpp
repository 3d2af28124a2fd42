#pragma once

#include <json.hpp>
#include <string>

#include "fpk/trainer.hpp"

namespace fpk {

/// Loads a run configuration from JSON. The schema is closed: unknown
/// keys are rejected so experiment knobs can never be silently ignored.
/// Missing keys resolve to documented defaults (some per system).
TrainingConfig load_config(const std::string& path);
TrainingConfig config_from_json(const nlohmann::json& j);

/// Fully materialized configuration (every default resolved).
nlohmann::json config_to_json(const TrainingConfig& config);

}  // namespace fpk
