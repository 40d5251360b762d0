#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptz/geometry.hpp"
#include "ptz/rng.hpp"

namespace ptz {

/// Side length of the square field, in meters. The field is [0, kFieldSize]^2.
inline constexpr double kFieldSize = 70.0;
inline constexpr int kBackgroundCount = 25;
inline constexpr double kVehicleMaxSpeed = 16.0;
inline constexpr double kVehicleMeanSpeed = 6.0;
inline constexpr double kHumanMaxSpeed = 2.5;
inline constexpr double kHumanMeanSpeed = 1.4;

enum class ObjectKind : std::uint8_t { vehicle, human, tree };
enum class VehicleType : std::uint8_t { suv1, suv2, pickup, sports, hatchback, truck };
enum class Color : std::uint8_t { blue, red, grey, green, white, black };

inline constexpr int kSubclassVehicle = 0;
inline constexpr int kSubclassHuman = 1;
inline constexpr int kHumanCharacterCount = 6;

struct Dims {
  double length = 0.0;  // along heading
  double width = 0.0;
  double height = 0.0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct ObjectSpec {
  int id = 0;
  ObjectKind kind = ObjectKind::vehicle;
  VehicleType vehicle_type = VehicleType::suv1;  // vehicles only
  int human_id = 0;                             // humans only
  Color color = Color::blue;
  Dims dims;
  bool trackable = false;
  int subclass_id = kSubclassVehicle;
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct ObjectState {
  Vec2 position;
  double heading = 0.0;  // degrees, 0 = +y (north), 90 = +x (east)
  double speed = 0.0;    // m/s
  bool stalled = false;  // stopped at a boundary, turns on the next step
  friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct SceneObject {
  ObjectSpec spec;
  ObjectState state;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

enum class ScenarioId : std::uint8_t { sc0_static, sc1, sc2, sc3, sc4, sc5, dt };
enum class BackgroundMode : std::uint8_t { fixed, variable };

/// One entry of a trackable catalog: a vehicle model/color or a human character.
struct CatalogEntry {
  ObjectKind kind = ObjectKind::vehicle;
  VehicleType vehicle_type = VehicleType::suv1;
  Color color = Color::blue;
  int human_id = 0;
  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct ScenarioSpec {
  ScenarioId id = ScenarioId::sc1;
  std::vector<CatalogEntry> trackable_catalog;
  /// DT only: catalog of the human sub-class.
  std::vector<CatalogEntry> human_catalog;
  BackgroundMode background_mode = BackgroundMode::fixed;
  bool trees_enabled = false;
  bool humans_enabled = false;
  bool augmentations_enabled = false;
  bool dt_enabled = false;
  bool objects_move = true;
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct WorldState {
  std::vector<SceneObject> objects;
  int background_id = 0;
  bool walls_visible = false;
  int target_id = 0;
  double sim_time = 0.0;
  std::uint64_t seed = 0;
  bool objects_move = true;
  Rng motion_rng;
  friend bool operator==(const WorldState&, const WorldState&) = default;

  const SceneObject* find(int id) const;
  SceneObject* find(int id);
  const SceneObject& target() const;
};

enum class EvalVariation : std::uint8_t { as_trained, fixed_bg, var_bg_trees, var_bg_trees_humans, multi_target };

Dims vehicle_dims(VehicleType type);
Dims human_dims();
/// Trees are two stacked boxes; `dims` of a tree object is the trunk.
Dims tree_trunk_dims();
Dims tree_canopy_dims();

std::string_view to_string(ScenarioId id);
std::string_view to_string(VehicleType type);
std::string_view to_string(Color color);
std::string_view to_string(ObjectKind kind);
std::string_view to_string(EvalVariation v);
std::optional<ScenarioId> parse_scenario_id(std::string_view name);
std::optional<EvalVariation> parse_variation(std::string_view name);
std::span<const ScenarioId> all_scenario_ids();

/// Built-in scenario definitions (sc0_static is a desk-scale addition).
ScenarioSpec scenario(ScenarioId id);

WorldState build_scenario(const ScenarioSpec& spec, std::uint64_t seed);

/// Advances every moving object by `dt` seconds. Throws std::invalid_argument if dt <= 0.
WorldState step_world(WorldState world, double dt);

WorldState eval_variation(WorldState world, EvalVariation mode);

/// Moves object `id` to a fresh random ground position that keeps clear of
/// the other objects, with a new random heading.
void replace_object(WorldState& world, int id, Rng& rng);

}  // namespace ptz
