#include "ptz/camera.hpp"

#include <algorithm>
#include <cmath>

namespace ptz {

ApplyResult apply_action(const PtzState& ptz, const PtzAction& action) {
  ApplyResult r;
  r.state.pan = std::clamp(ptz.pan + action.pan_delta(), kPanMin, kPanMax);
  r.state.tilt = std::clamp(ptz.tilt + action.tilt_delta(), kTiltMin, kTiltMax);
  r.state.fov = std::clamp(ptz.fov + action.fov_delta(), kFovMin, kFovMax);
  r.changed = !(r.state == ptz);
  return r;
}

PtzState clamp_ptz(const PtzState& ptz) {
  return {std::clamp(ptz.pan, kPanMin, kPanMax), std::clamp(ptz.tilt, kTiltMin, kTiltMax),
          std::clamp(ptz.fov, kFovMin, kFovMax)};
}

PtzState look_at(const CameraRig& rig, const Vec3& p, double fov) {
  const Vec3 d = p - rig.position;
  const double pan = rad2deg(std::atan2(d.x, d.y));
  const double tilt = rad2deg(std::atan2(d.z, std::hypot(d.x, d.y)));
  return clamp_ptz({pan, tilt, fov});
}

double vertical_fov(double fov_h, double width, double height) { return fov_h * height / width; }

CameraBasis camera_basis(const CameraRig& rig, const PtzState& ptz) {
  const double psi = deg2rad(ptz.pan);
  const double theta = deg2rad(ptz.tilt);
  CameraBasis b;
  b.right = {std::cos(psi), -std::sin(psi), 0.0};
  b.forward = {std::sin(psi) * std::cos(theta), std::cos(psi) * std::cos(theta), std::sin(theta)};
  b.up = cross(b.right, b.forward);
  const double w = rig.width;
  const double h = rig.height;
  b.cx = w / 2.0;
  b.cy = h / 2.0;
  b.fx = (w / 2.0) / std::tan(deg2rad(ptz.fov) / 2.0);
  b.fy = (h / 2.0) / std::tan(deg2rad(vertical_fov(ptz.fov, w, h)) / 2.0);
  return b;
}

std::optional<Vec2> project_point(const CameraRig& rig, const CameraBasis& basis, const Vec3& p) {
  const Vec3 d = p - rig.position;
  const double zc = dot(d, basis.forward);
  if (zc <= 1e-6) return std::nullopt;
  const double xc = dot(d, basis.right);
  const double yc = dot(d, basis.up);
  return Vec2{basis.cx + basis.fx * xc / zc, basis.cy - basis.fy * yc / zc};
}

std::optional<Vec2> project_point(const CameraRig& rig, const PtzState& ptz, const Vec3& p) {
  return project_point(rig, camera_basis(rig, ptz), p);
}

Vec3 pixel_ray(const CameraBasis& basis, double u, double v) {
  const double a = (u - basis.cx) / basis.fx;
  const double b = -(v - basis.cy) / basis.fy;
  return normalized(basis.right * a + basis.up * b + basis.forward);
}

std::array<Vec3, 8> box_corners(Vec2 center, double heading_deg, const Dims& dims, double z0) {
  const double h = deg2rad(heading_deg);
  // Length axis along the heading, width axis to its right.
  const Vec2 along{std::sin(h), std::cos(h)};
  const Vec2 side{std::cos(h), -std::sin(h)};
  const double hl = dims.length / 2.0;
  const double hw = dims.width / 2.0;
  std::array<Vec3, 8> out;
  int k = 0;
  for (double sl : {-1.0, 1.0}) {
    for (double sw : {-1.0, 1.0}) {
      const double x = center.x + sl * hl * along.x + sw * hw * side.x;
      const double y = center.y + sl * hl * along.y + sw * hw * side.y;
      out[k++] = {x, y, z0};
      out[k++] = {x, y, z0 + dims.height};
    }
  }
  return out;
}

Visibility visibility_from_corners(const CameraRig& rig, const CameraBasis& basis, const std::array<Vec3, 8>& corners) {
  Visibility vis;
  BoundingBox raw{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const Vec3& c : corners) {
    const auto px = project_point(rig, basis, c);
    if (!px) return vis;
    raw.xmin = std::min(raw.xmin, px->x);
    raw.ymin = std::min(raw.ymin, px->y);
    raw.xmax = std::max(raw.xmax, px->x);
    raw.ymax = std::max(raw.ymax, px->y);
  }
  const double w = rig.width;
  const double h = rig.height;
  vis.in_front = true;
  vis.raw_box = raw;
  BoundingBox c;
  c.xmin = std::clamp(raw.xmin, 0.0, w);
  c.xmax = std::clamp(raw.xmax, 0.0, w);
  c.ymin = std::clamp(raw.ymin, 0.0, h);
  c.ymax = std::clamp(raw.ymax, 0.0, h);
  vis.clipped_box = c;
  vis.clipped = raw.xmin <= 0.0 || raw.ymin <= 0.0 || raw.xmax >= w || raw.ymax >= h;
  vis.visible = c.area() >= 1.0;
  return vis;
}

Visibility oracle_bbox(const CameraRig& rig, const PtzState& ptz, const ObjectSpec& spec, const ObjectState& state) {
  return visibility_from_corners(rig, camera_basis(rig, ptz), box_corners(state.position, state.heading, spec.dims));
}

}  // namespace ptz
