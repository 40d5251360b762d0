#pragma once

#include <string>
#include <string_view>

#include "ptz/scene.hpp"

namespace ptz {

/// JSON document for a ScenarioSpec:
/// {"id":"sc4","background_mode":"variable","trees":true,"humans":true,"augmentations":true,
///  "dt":false,"objects_move":true,
///  "trackable_catalog":[{"kind":"vehicle","vehicle_type":"SUV1","color":"blue"},...],
///  "human_catalog":[{"kind":"human","human_id":0},...]}
std::string scenario_to_json(const ScenarioSpec& spec);

/// Missing keys fall back to the built-in definition of `id`. Throws std::invalid_argument.
ScenarioSpec scenario_from_json(std::string_view text);

}  // namespace ptz
