#pragma once

// JSON conversions for the config types (nlohmann ADL interface). Shared by
// the checkpoint header, the training-run snapshot, metrics output, and the
// CLI config echo.

#include <json.hpp>

#include "sietrack/data.hpp"
#include "sietrack/model.hpp"
#include "sietrack/training.hpp"

namespace sietrack {

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

// Canonical (sorted-key, no-whitespace) serialization used for hashing.
std::string canonical_config_string(const ModelConfig& cfg);

}  // namespace sietrack
