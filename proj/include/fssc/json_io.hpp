#pragma once

#include "json.hpp"

#include "fssc/model.hpp"
#include "fssc/stsc_config.hpp"

namespace fssc {

void to_json(nlohmann::json& j, const StscConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, StscConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace fssc
