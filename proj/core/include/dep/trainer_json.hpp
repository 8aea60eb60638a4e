#pragma once

// JSON (de)serialization of TrainConfig for checkpoint manifests and run
// configs. Unknown keys are rejected so a typo never silently changes an
// experiment.

#include <json.hpp>

#include "dep/trainer.hpp"

namespace dep {

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace dep
