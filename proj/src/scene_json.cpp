#include "ptz/scene_json.hpp"

#include <json.hpp>
#include <stdexcept>

namespace ptz {
namespace {

using nlohmann::json;

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const E (&values)[N], const char* what) {
  for (E v : values)
    if (to_string(v) == s) return v;
  throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

constexpr VehicleType kVehicleTypes[] = {VehicleType::suv1,   VehicleType::suv2,      VehicleType::pickup,
                                         VehicleType::sports, VehicleType::hatchback, VehicleType::truck};
constexpr Color kColors[] = {Color::blue, Color::red, Color::grey, Color::green, Color::white, Color::black};

json entry_to_json(const CatalogEntry& e) {
  if (e.kind == ObjectKind::human) return {{"kind", "human"}, {"human_id", e.human_id}};
  return {{"kind", "vehicle"},
          {"vehicle_type", std::string(to_string(e.vehicle_type))},
          {"color", std::string(to_string(e.color))}};
}

CatalogEntry entry_from_json(const json& j) {
  CatalogEntry e;
  const std::string kind = j.value("kind", "vehicle");
  if (kind == "human") {
    e.kind = ObjectKind::human;
    e.human_id = j.at("human_id").get<int>();
    if (e.human_id < 0 || e.human_id >= kHumanCharacterCount) throw std::invalid_argument("human_id out of range");
  } else if (kind == "vehicle") {
    e.kind = ObjectKind::vehicle;
    e.vehicle_type = parse_enum(j.at("vehicle_type").get<std::string>(), kVehicleTypes, "vehicle type");
    e.color = parse_enum(j.at("color").get<std::string>(), kColors, "color");
  } else {
    throw std::invalid_argument("unknown catalog kind: " + kind);
  }
  return e;
}

}  // namespace

std::string scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["id"] = std::string(to_string(s.id));
  j["background_mode"] = s.background_mode == BackgroundMode::fixed ? "fixed" : "variable";
  j["trees"] = s.trees_enabled;
  j["humans"] = s.humans_enabled;
  j["augmentations"] = s.augmentations_enabled;
  j["dt"] = s.dt_enabled;
  j["objects_move"] = s.objects_move;
  j["trackable_catalog"] = json::array();
  for (const auto& e : s.trackable_catalog) j["trackable_catalog"].push_back(entry_to_json(e));
  j["human_catalog"] = json::array();
  for (const auto& e : s.human_catalog) j["human_catalog"].push_back(entry_to_json(e));
  return j.dump(2);
}

ScenarioSpec scenario_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario JSON: ") + e.what());
  }
  try {
    const auto id = parse_scenario_id(j.at("id").get<std::string>());
    if (!id) throw std::invalid_argument("scenario JSON: unknown id");
    ScenarioSpec s = scenario(*id);
    if (j.contains("background_mode")) {
      const std::string m = j["background_mode"].get<std::string>();
      if (m != "fixed" && m != "variable") throw std::invalid_argument("scenario JSON: bad background_mode");
      s.background_mode = m == "fixed" ? BackgroundMode::fixed : BackgroundMode::variable;
    }
    s.trees_enabled = j.value("trees", s.trees_enabled);
    s.humans_enabled = j.value("humans", s.humans_enabled);
    s.augmentations_enabled = j.value("augmentations", s.augmentations_enabled);
    s.dt_enabled = j.value("dt", s.dt_enabled);
    s.objects_move = j.value("objects_move", s.objects_move);
    if (j.contains("trackable_catalog")) {
      s.trackable_catalog.clear();
      for (const auto& e : j["trackable_catalog"]) s.trackable_catalog.push_back(entry_from_json(e));
    }
    if (j.contains("human_catalog")) {
      s.human_catalog.clear();
      for (const auto& e : j["human_catalog"]) s.human_catalog.push_back(entry_from_json(e));
    }
    if (s.trackable_catalog.empty()) throw std::invalid_argument("scenario JSON: empty trackable_catalog");
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario JSON: ") + e.what());
  }
}

}  // namespace ptz
