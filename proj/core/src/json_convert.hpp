#pragma once

// Internal: JSON conversions shared by the config, manifest and report code.

#include <json.hpp>

#include "badfusion/attack_config.hpp"

namespace badfusion::detail {

nlohmann::json to_json(const PoisonConfig& config);
PoisonConfig poison_config_from_json(const nlohmann::json& doc);

nlohmann::json rgb_to_json(Rgb c);
Rgb rgb_from_json(const nlohmann::json& j, const char* where);

}  // namespace badfusion::detail
