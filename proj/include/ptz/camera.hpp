#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ptz/geometry.hpp"
#include "ptz/scene.hpp"

namespace ptz {

inline constexpr double kPanMin = -90.0;
inline constexpr double kPanMax = 90.0;
inline constexpr double kTiltMin = -60.0;
inline constexpr double kTiltMax = 10.0;
inline constexpr double kFovMin = 5.0;
inline constexpr double kFovMax = 90.0;

inline constexpr double kPanStep = 2.0;
inline constexpr double kTiltStep = 2.0;
inline constexpr double kFovStep = 1.0;

/// Camera orientation and zoom, degrees. pan 0 faces +y, positive pan turns toward +x;
/// tilt 0 is horizontal, negative looks down.
struct PtzState {
  double pan = 0.0;
  double tilt = -13.0;
  double fov = 90.0;  // horizontal
  friend bool operator==(const PtzState&, const PtzState&) = default;
};

inline constexpr PtzState kInitialPtz{0.0, -13.0, 90.0};

enum class Move : std::int8_t { minus = -1, none = 0, plus = 1 };

/// Protocol index {0,1,2} <-> {minus, none, plus}.
inline Move move_from_index(int i) { return static_cast<Move>(i - 1); }
inline int move_index(Move m) { return static_cast<int>(m) + 1; }

struct PtzAction {
  Move pan = Move::none;
  Move tilt = Move::none;
  Move zoom = Move::none;  // plus widens the field of view (zoom out)

  double pan_delta() const { return kPanStep * static_cast<int>(pan); }
  double tilt_delta() const { return kTiltStep * static_cast<int>(tilt); }
  double fov_delta() const { return kFovStep * static_cast<int>(zoom); }

  /// Flat index in [0, 27), pan-major.
  int index() const { return move_index(pan) * 9 + move_index(tilt) * 3 + move_index(zoom); }
  static PtzAction from_index(int i) { return {move_from_index(i / 9), move_from_index(i / 3 % 3), move_from_index(i % 3)}; }

  friend bool operator==(const PtzAction&, const PtzAction&) = default;
};

inline constexpr PtzAction kNoop{};

struct CameraRig {
  Vec3 position{35.0, 0.0, 8.0};
  int width = 120;
  int height = 120;
};

inline CameraRig make_rig(int size, double height = 8.0) { return {{35.0, 0.0, height}, size, size}; }

struct ApplyResult {
  PtzState state;
  bool changed = false;
};

ApplyResult apply_action(const PtzState& ptz, const PtzAction& action);

/// Clamps each component to its limits.
PtzState clamp_ptz(const PtzState& ptz);
/// Pan and tilt that put `p` on the optical axis (clamped), keeping `fov`.
PtzState look_at(const CameraRig& rig, const Vec3& p, double fov);

double vertical_fov(double fov_h, double width, double height);

/// Orthonormal camera basis plus focal lengths in pixels.
struct CameraBasis {
  Vec3 right;
  Vec3 up;
  Vec3 forward;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

CameraBasis camera_basis(const CameraRig& rig, const PtzState& ptz);

/// Pixel coordinates of a world point, or nullopt when the point is at or behind the image plane.
std::optional<Vec2> project_point(const CameraRig& rig, const PtzState& ptz, const Vec3& p);
std::optional<Vec2> project_point(const CameraRig& rig, const CameraBasis& basis, const Vec3& p);

/// Unit direction of the ray through pixel coordinate (u, v); the exact inverse of project_point.
Vec3 pixel_ray(const CameraBasis& basis, double u, double v);

struct BoundingBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Visibility {
  bool visible = false;
  bool in_front = false;  // every corner in front of the camera
  BoundingBox raw_box;
  BoundingBox clipped_box;
  bool clipped = false;
  friend bool operator==(const Visibility&, const Visibility&) = default;
};

/// Corners of a box resting at z0 with footprint centered at `center`; length runs along `heading_deg`.
std::array<Vec3, 8> box_corners(Vec2 center, double heading_deg, const Dims& dims, double z0 = 0.0);

Visibility visibility_from_corners(const CameraRig& rig, const CameraBasis& basis, const std::array<Vec3, 8>& corners);

Visibility oracle_bbox(const CameraRig& rig, const PtzState& ptz, const ObjectSpec& spec, const ObjectState& state);

}  // namespace ptz
