#include "ptz/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace ptz {
namespace {

// Heading random walk: 15 deg per second of simulated time (std of the step is 15 * dt).
constexpr double kHeadingSigmaPerSecond = 15.0;
// Speed random walk: 1 m/s per second (std of the step is 1 * dt).
constexpr double kSpeedSigmaPerSecond = 1.0;
// Mean reversion rate toward the nominal speed, 1/s.
constexpr double kSpeedPullRate = 0.5;
constexpr double kPlacementMargin = 3.0;
constexpr double kPlacementGap = 1.0;
// Trees keep clear of the camera mount so they cannot blind the camera.
constexpr double kTreeCameraClearance = 10.0;
constexpr Vec2 kCameraBase{35.0, 0.0};

constexpr std::array<ScenarioId, 7> kScenarioIds{ScenarioId::sc0_static, ScenarioId::sc1, ScenarioId::sc2,
                                                 ScenarioId::sc3,        ScenarioId::sc4, ScenarioId::sc5,
                                                 ScenarioId::dt};

CatalogEntry vehicle(VehicleType type, Color color) { return {ObjectKind::vehicle, type, color, 0}; }
CatalogEntry human(int human_id) { return {ObjectKind::human, VehicleType::suv1, Color::blue, human_id}; }

// Clothing tone of each human character.
constexpr std::array<Color, kHumanCharacterCount> kHumanColors{Color::red,   Color::green, Color::white,
                                                               Color::black, Color::grey,  Color::blue};

double footprint_radius(const ObjectSpec& spec) {
  if (spec.kind == ObjectKind::tree) {
    const Dims canopy = tree_canopy_dims();
    return 0.5 * std::hypot(canopy.length, canopy.width);
  }
  return 0.5 * std::hypot(spec.dims.length, spec.dims.width);
}

double normalize_heading(double h) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  return h;
}

bool is_moving_kind(ObjectKind kind) { return kind != ObjectKind::tree; }

double mean_speed(ObjectKind kind) { return kind == ObjectKind::human ? kHumanMeanSpeed : kVehicleMeanSpeed; }
double max_speed(ObjectKind kind) { return kind == ObjectKind::human ? kHumanMaxSpeed : kVehicleMaxSpeed; }

double initial_speed(ObjectKind kind, Rng& rng) {
  if (kind == ObjectKind::human) return rng.uniform(0.8, 2.0);
  return rng.uniform(3.0, 9.0);
}

ObjectSpec spec_from_entry(const CatalogEntry& e, int id, bool trackable, int subclass) {
  ObjectSpec s;
  s.id = id;
  s.kind = e.kind;
  s.trackable = trackable;
  s.subclass_id = subclass;
  if (e.kind == ObjectKind::vehicle) {
    s.vehicle_type = e.vehicle_type;
    s.color = e.color;
    s.dims = vehicle_dims(e.vehicle_type);
  } else {
    s.human_id = e.human_id;
    s.color = kHumanColors[static_cast<std::size_t>(e.human_id) % kHumanColors.size()];
    s.dims = human_dims();
  }
  return s;
}

int next_id(const WorldState& w) {
  int id = 0;
  for (const auto& o : w.objects) id = std::max(id, o.spec.id);
  return id + 1;
}

bool clear_of_others(const WorldState& w, int id, const ObjectSpec& spec, Vec2 p) {
  if (spec.kind == ObjectKind::tree &&
      std::hypot(p.x - kCameraBase.x, p.y - kCameraBase.y) < kTreeCameraClearance) {
    return false;
  }
  const double r = footprint_radius(spec);
  for (const auto& o : w.objects) {
    if (o.spec.id == id) continue;
    const double d = std::hypot(o.state.position.x - p.x, o.state.position.y - p.y);
    if (d < r + footprint_radius(o.spec) + kPlacementGap) return false;
  }
  return true;
}

Vec2 draw_position(const WorldState& w, int id, const ObjectSpec& spec, Rng& rng) {
  Vec2 p;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    p = {rng.uniform(kPlacementMargin, kFieldSize - kPlacementMargin),
         rng.uniform(kPlacementMargin, kFieldSize - kPlacementMargin)};
    if (clear_of_others(w, id, spec, p)) return p;
  }
  return p;  // crowded field: accept the last draw
}

void add_object(WorldState& w, ObjectSpec spec, Rng& rng, bool moving) {
  SceneObject obj;
  spec.id = next_id(w);
  obj.spec = spec;
  obj.state.position = draw_position(w, spec.id, spec, rng);
  obj.state.heading = rng.uniform(0.0, 360.0);
  obj.state.speed = (moving && is_moving_kind(spec.kind)) ? initial_speed(spec.kind, rng) : 0.0;
  w.objects.push_back(obj);
}

ObjectSpec tree_spec() {
  ObjectSpec s;
  s.kind = ObjectKind::tree;
  s.color = Color::green;
  s.dims = tree_trunk_dims();
  s.trackable = false;
  return s;
}

void add_trees(WorldState& w, Rng& rng) {
  const int n = rng.uniform_int(2, 6);
  for (int i = 0; i < n; ++i) add_object(w, tree_spec(), rng, false);
}

void add_distractor_humans(WorldState& w, Rng& rng) {
  const int n = rng.uniform_int(1, 3);
  for (int i = 0; i < n; ++i) {
    const int hid = static_cast<int>(rng.below(kHumanCharacterCount));
    add_object(w, spec_from_entry(human(hid), 0, false, kSubclassHuman), rng, w.objects_move);
  }
}

void remove_if(WorldState& w, auto pred) {
  std::erase_if(w.objects, [&](const SceneObject& o) { return o.spec.id != w.target_id && pred(o); });
}

bool is_distractor_human(const SceneObject& o) { return o.spec.kind == ObjectKind::human && !o.spec.trackable; }

// Draws a heading that points strictly into the field from a boundary position.
double inward_heading(Vec2 p, Rng& rng) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    const double h = rng.uniform(0.0, 360.0);
    const double dx = std::sin(deg2rad(h));
    const double dy = std::cos(deg2rad(h));
    if (p.x <= 0.0 && dx <= 0.0) continue;
    if (p.x >= kFieldSize && dx >= 0.0) continue;
    if (p.y <= 0.0 && dy <= 0.0) continue;
    if (p.y >= kFieldSize && dy >= 0.0) continue;
    return h;
  }
  return normalize_heading(rad2deg(std::atan2(kFieldSize / 2 - p.x, kFieldSize / 2 - p.y)));
}

void advance(SceneObject& obj, double dt, Rng& rng) {
  ObjectState& s = obj.state;
  const ObjectKind kind = obj.spec.kind;
  if (s.stalled) {
    s.heading = inward_heading(s.position, rng);
    s.stalled = false;
  }

  const double h = deg2rad(s.heading);
  Vec2 p{s.position.x + s.speed * dt * std::sin(h), s.position.y + s.speed * dt * std::cos(h)};
  const bool outside = p.x < 0.0 || p.x > kFieldSize || p.y < 0.0 || p.y > kFieldSize;
  s.position = {std::clamp(p.x, 0.0, kFieldSize), std::clamp(p.y, 0.0, kFieldSize)};
  if (outside) {
    s.speed = 0.0;
    s.stalled = true;
    return;
  }

  s.heading = normalize_heading(s.heading + rng.normal() * kHeadingSigmaPerSecond * dt);
  const double pull = kSpeedPullRate * (mean_speed(kind) - s.speed) * dt;
  s.speed = std::clamp(s.speed + pull + rng.normal() * kSpeedSigmaPerSecond * dt, 0.0, max_speed(kind));
}

}  // namespace

const SceneObject* WorldState::find(int id) const {
  for (const auto& o : objects)
    if (o.spec.id == id) return &o;
  return nullptr;
}

SceneObject* WorldState::find(int id) {
  for (auto& o : objects)
    if (o.spec.id == id) return &o;
  return nullptr;
}

const SceneObject& WorldState::target() const {
  const SceneObject* t = find(target_id);
  if (t == nullptr) throw std::logic_error("world has no target object");
  return *t;
}

Dims vehicle_dims(VehicleType type) {
  switch (type) {
    case VehicleType::suv1: return {4.6, 1.9, 1.8};
    case VehicleType::suv2: return {4.8, 2.0, 1.9};
    case VehicleType::pickup: return {5.3, 2.0, 1.9};
    case VehicleType::sports: return {4.4, 1.9, 1.2};
    case VehicleType::hatchback: return {4.0, 1.8, 1.5};
    case VehicleType::truck: return {6.5, 2.4, 2.6};
  }
  return {4.6, 1.9, 1.8};
}

Dims human_dims() { return {0.5, 0.5, 1.75}; }
Dims tree_trunk_dims() { return {0.4, 0.4, 3.0}; }
Dims tree_canopy_dims() { return {2.5, 2.5, 3.0}; }

std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::sc0_static: return "sc0_static";
    case ScenarioId::sc1: return "sc1";
    case ScenarioId::sc2: return "sc2";
    case ScenarioId::sc3: return "sc3";
    case ScenarioId::sc4: return "sc4";
    case ScenarioId::sc5: return "sc5";
    case ScenarioId::dt: return "dt";
  }
  return "?";
}

std::string_view to_string(VehicleType type) {
  switch (type) {
    case VehicleType::suv1: return "SUV1";
    case VehicleType::suv2: return "SUV2";
    case VehicleType::pickup: return "Pickup";
    case VehicleType::sports: return "Sports";
    case VehicleType::hatchback: return "HatchBack";
    case VehicleType::truck: return "Truck";
  }
  return "?";
}

std::string_view to_string(Color color) {
  switch (color) {
    case Color::blue: return "blue";
    case Color::red: return "red";
    case Color::grey: return "grey";
    case Color::green: return "green";
    case Color::white: return "white";
    case Color::black: return "black";
  }
  return "?";
}

std::string_view to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::vehicle: return "vehicle";
    case ObjectKind::human: return "human";
    case ObjectKind::tree: return "tree";
  }
  return "?";
}

std::string_view to_string(EvalVariation v) {
  switch (v) {
    case EvalVariation::as_trained: return "as_trained";
    case EvalVariation::fixed_bg: return "fixed_bg";
    case EvalVariation::var_bg_trees: return "var_bg_trees";
    case EvalVariation::var_bg_trees_humans: return "var_bg_trees_humans";
    case EvalVariation::multi_target: return "multi_target";
  }
  return "?";
}

std::optional<ScenarioId> parse_scenario_id(std::string_view name) {
  for (ScenarioId id : kScenarioIds)
    if (to_string(id) == name) return id;
  return std::nullopt;
}

std::optional<EvalVariation> parse_variation(std::string_view name) {
  for (auto v : {EvalVariation::as_trained, EvalVariation::fixed_bg, EvalVariation::var_bg_trees,
                 EvalVariation::var_bg_trees_humans, EvalVariation::multi_target}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

std::span<const ScenarioId> all_scenario_ids() { return kScenarioIds; }

ScenarioSpec scenario(ScenarioId id) {
  ScenarioSpec s;
  s.id = id;
  switch (id) {
    case ScenarioId::sc0_static:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue)};
      s.objects_move = false;
      break;
    case ScenarioId::sc1:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue)};
      break;
    case ScenarioId::sc2:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue)};
      s.trees_enabled = true;
      s.augmentations_enabled = true;
      break;
    case ScenarioId::sc3:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue)};
      s.background_mode = BackgroundMode::variable;
      s.trees_enabled = true;
      s.augmentations_enabled = true;
      break;
    case ScenarioId::sc4:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue), vehicle(VehicleType::suv1, Color::red),
                             vehicle(VehicleType::suv1, Color::grey)};
      s.background_mode = BackgroundMode::variable;
      s.trees_enabled = true;
      s.augmentations_enabled = true;
      s.humans_enabled = true;
      break;
    case ScenarioId::sc5:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue),   vehicle(VehicleType::suv1, Color::red),
                             vehicle(VehicleType::pickup, Color::grey), vehicle(VehicleType::pickup, Color::red),
                             vehicle(VehicleType::sports, Color::blue), vehicle(VehicleType::sports, Color::grey)};
      s.background_mode = BackgroundMode::variable;
      s.trees_enabled = true;
      s.augmentations_enabled = true;
      s.humans_enabled = true;
      break;
    case ScenarioId::dt:
      s.trackable_catalog = {vehicle(VehicleType::suv1, Color::blue)};
      s.human_catalog = {human(0), human(1), human(2), human(3)};
      s.background_mode = BackgroundMode::variable;
      s.trees_enabled = true;
      s.augmentations_enabled = true;
      s.dt_enabled = true;
      break;
  }
  return s;
}

WorldState build_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.trackable_catalog.empty()) throw std::invalid_argument("scenario has an empty trackable catalog");
  if (spec.dt_enabled && spec.human_catalog.empty()) throw std::invalid_argument("DT scenario needs humans");

  WorldState w;
  w.seed = seed;
  w.objects_move = spec.objects_move;
  w.motion_rng = Rng(seed, "motion");
  Rng rng(seed, "placement");

  const auto& pick = spec.trackable_catalog[rng.below(spec.trackable_catalog.size())];
  add_object(w, spec_from_entry(pick, 0, true, kSubclassVehicle), rng, spec.objects_move);
  w.target_id = w.objects.back().spec.id;

  if (spec.dt_enabled) {
    const auto& h = spec.human_catalog[rng.below(spec.human_catalog.size())];
    add_object(w, spec_from_entry(h, 0, true, kSubclassHuman), rng, spec.objects_move);
  }
  if (spec.background_mode == BackgroundMode::variable) {
    w.background_id = static_cast<int>(rng.below(kBackgroundCount));
    w.walls_visible = true;
  }
  if (spec.trees_enabled) add_trees(w, rng);
  if (spec.humans_enabled) add_distractor_humans(w, rng);
  return w;
}

WorldState step_world(WorldState world, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_world: dt must be positive");
  if (world.objects_move) {
    for (auto& obj : world.objects) {
      if (is_moving_kind(obj.spec.kind)) advance(obj, dt, world.motion_rng);
    }
  }
  world.sim_time += dt;
  return world;
}

WorldState eval_variation(WorldState world, EvalVariation mode) {
  Rng rng(world.seed, "variation");
  const auto is_tree = [](const SceneObject& o) { return o.spec.kind == ObjectKind::tree; };
  const auto has = [&](auto pred) { return std::any_of(world.objects.begin(), world.objects.end(), pred); };

  switch (mode) {
    case EvalVariation::as_trained:
      break;
    case EvalVariation::fixed_bg:
      world.background_id = 0;
      world.walls_visible = false;
      remove_if(world, [&](const SceneObject& o) { return is_tree(o) || is_distractor_human(o); });
      break;
    case EvalVariation::var_bg_trees:
    case EvalVariation::var_bg_trees_humans:
      world.background_id = static_cast<int>(rng.below(kBackgroundCount));
      world.walls_visible = true;
      if (mode == EvalVariation::var_bg_trees) remove_if(world, is_distractor_human);
      if (!has(is_tree)) add_trees(world, rng);
      if (mode == EvalVariation::var_bg_trees_humans && !has(is_distractor_human)) add_distractor_humans(world, rng);
      break;
    case EvalVariation::multi_target: {
      const ObjectSpec& t = world.target().spec;
      ObjectSpec extra = t;
      if (t.kind == ObjectKind::vehicle) {
        // Prefer a visibly different model or color.
        static constexpr std::array<Color, 3> kAlt{Color::red, Color::grey, Color::white};
        extra.color = kAlt[rng.below(kAlt.size())];
        if (extra.color == t.color) extra.color = Color::black;
      }
      add_object(world, extra, rng, world.objects_move);
      break;
    }
  }
  return world;
}

void replace_object(WorldState& world, int id, Rng& rng) {
  SceneObject* obj = world.find(id);
  if (obj == nullptr) throw std::invalid_argument("replace_object: unknown id");
  obj->state.position = draw_position(world, id, obj->spec, rng);
  obj->state.heading = rng.uniform(0.0, 360.0);
  obj->state.stalled = false;
}

}  // namespace ptz
