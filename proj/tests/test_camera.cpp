#include <doctest.h>

#include <cmath>

#include "ptz/camera.hpp"

using namespace ptz;

namespace {

const CameraRig kRig = make_rig(120);

ObjectSpec box_spec(double l, double w, double h) {
  ObjectSpec s;
  s.id = 1;
  s.dims = {l, w, h};
  s.trackable = true;
  return s;
}

// Hull of points sampled on every face of the box, projected one by one.
BoundingBox sampled_hull(const PtzState& ptz, const ObjectSpec& spec, const ObjectState& st, int n) {
  const auto c = box_corners(st.position, st.heading, spec.dims);
  // c[0] origin corner; c[1] +z; c[2] +width; c[4] +length.
  const Vec3 o = c[0];
  const Vec3 ez = c[1] - o;
  const Vec3 ew = c[2] - o;
  const Vec3 el = c[4] - o;
  BoundingBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double a = double(i) / n;
      const double bb = double(j) / n;
      const Vec3 pts[6] = {o + ew * a + el * bb,       o + ez + ew * a + el * bb, o + ez * a + el * bb,
                           o + ew + ez * a + el * bb, o + ez * a + ew * bb,      o + el + ez * a + ew * bb};
      for (const Vec3& p : pts) {
        const auto px = project_point(kRig, ptz, p);
        REQUIRE(px.has_value());
        b.xmin = std::min(b.xmin, px->x);
        b.ymin = std::min(b.ymin, px->y);
        b.xmax = std::max(b.xmax, px->x);
        b.ymax = std::max(b.ymax, px->y);
      }
    }
  }
  return b;
}

}  // namespace

TEST_CASE("apply_action steps and clamps") {
  auto r = apply_action({0, -13, 90}, {Move::plus, Move::none, Move::minus});
  CHECK(r.state == PtzState{2, -13, 89});
  CHECK(r.changed);

  r = apply_action({90, 0, 45}, {Move::plus, Move::none, Move::none});
  CHECK(r.state.pan == 90);
  CHECK_FALSE(r.changed);

  r = apply_action({0, 0, 5}, {Move::none, Move::none, Move::minus});
  CHECK(r.state.fov == 5);
  CHECK_FALSE(r.changed);

  r = apply_action({0, -60, 90}, {Move::none, Move::minus, Move::plus});
  CHECK(r.state == PtzState{0, -60, 90});
  CHECK_FALSE(r.changed);

  // Idempotent at the limits.
  const PtzState corner{-90, 10, 90};
  const PtzAction push{Move::minus, Move::plus, Move::plus};
  CHECK(apply_action(apply_action(corner, push).state, push).state == corner);
}

TEST_CASE("action index encoding") {
  for (int i = 0; i < 27; ++i) CHECK(PtzAction::from_index(i).index() == i);
  CHECK(kNoop.index() == 13);
  CHECK(move_from_index(0) == Move::minus);
  CHECK(move_from_index(1) == Move::none);
  CHECK(move_from_index(2) == Move::plus);
}

TEST_CASE("vertical fov") {
  CHECK(vertical_fov(90, 120, 120) == 90);
  CHECK(vertical_fov(90, 160, 120) == 67.5);
  CHECK(vertical_fov(45, 120, 120) == 45);
}

TEST_CASE("project_point examples") {
  const PtzState ptz{0, 0, 90};
  auto p = project_point(kRig, ptz, {35, 10, 8});
  REQUIRE(p);
  CHECK(p->x == doctest::Approx(60).epsilon(1e-12));
  CHECK(p->y == doctest::Approx(60).epsilon(1e-12));
  p = project_point(kRig, ptz, {45, 10, 8});
  REQUIRE(p);
  CHECK(p->x == doctest::Approx(120).epsilon(1e-12));
  CHECK(p->y == doctest::Approx(60).epsilon(1e-12));
  CHECK_FALSE(project_point(kRig, ptz, {35, -5, 8}).has_value());
  // Looking down: a ground point below the axis lands in the lower half.
  p = project_point(kRig, PtzState{0, -13, 90}, Vec3{35, 20, 0});
  REQUIRE(p);
  CHECK(p->y > 60);
  // Positive pan turns toward +x, so a point at +x moves toward the center.
  const auto a = project_point(kRig, PtzState{0, 0, 90}, Vec3{40, 10, 8});
  const auto b = project_point(kRig, PtzState{10, 0, 90}, Vec3{40, 10, 8});
  CHECK(b->x < a->x);
}

TEST_CASE("pixel_ray inverts project_point") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const PtzState ptz{rng.uniform(-90, 90), rng.uniform(-60, 10), rng.uniform(5, 90)};
    const Vec3 p{rng.uniform(0, 70), rng.uniform(1, 70), rng.uniform(0, 5)};
    const auto px = project_point(kRig, ptz, p);
    if (!px) continue;
    const Vec3 ray = pixel_ray(camera_basis(kRig, ptz), px->x, px->y);
    const Vec3 dir = normalized(p - kRig.position);
    CHECK(norm(ray - dir) < 1e-9);
  }
}

TEST_CASE("symmetric box projects to the image center") {
  const ObjectSpec s = box_spec(2, 2, 2);
  // Box spans z in [7, 9]: shift it by lowering the ground reference.
  const auto corners = box_corners({35, 20}, 0, s.dims, 7.0);
  const Visibility v = visibility_from_corners(kRig, camera_basis(kRig, {0, 0, 90}), corners);
  REQUIRE(v.visible);
  CHECK(v.raw_box.center().x == doctest::Approx(60).epsilon(1e-12));
  CHECK(v.raw_box.center().y == doctest::Approx(60).epsilon(1e-12));
  CHECK_FALSE(v.clipped);
}

TEST_CASE("object outside the frustum is invisible") {
  const ObjectSpec s = box_spec(4.6, 1.9, 1.8);
  const Visibility v = oracle_bbox(kRig, {90, -13, 90}, s, {{0, 5}, 0, 0, false});
  CHECK_FALSE(v.visible);
  const Visibility behind = oracle_bbox(kRig, {0, -13, 90}, s, {{35, -10}, 0, 0, false});
  CHECK_FALSE(behind.visible);
  CHECK_FALSE(behind.in_front);
}

TEST_CASE("clipped flag and clipped box") {
  const ObjectSpec s = box_spec(4.6, 1.9, 1.8);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const PtzState ptz{rng.uniform(-40, 40), rng.uniform(-40, 0), rng.uniform(5, 90)};
    const ObjectState st{{rng.uniform(0, 70), rng.uniform(5, 70)}, rng.uniform(0, 360), 0, false};
    const Visibility v = oracle_bbox(kRig, ptz, s, st);
    if (!v.in_front) continue;
    const bool inside = v.raw_box.xmin > 0 && v.raw_box.ymin > 0 && v.raw_box.xmax < 120 && v.raw_box.ymax < 120;
    CHECK(v.clipped == !inside);
    CHECK(v.clipped_box.xmin >= 0);
    CHECK(v.clipped_box.xmax <= 120);
    CHECK(v.clipped_box.ymin >= 0);
    CHECK(v.clipped_box.ymax <= 120);
    if (v.visible) CHECK(v.clipped_box.area() >= 1.0);
  }
}

TEST_CASE("oracle box equals the hull of sampled surface points") {
  const ObjectSpec s = box_spec(4.6, 1.9, 1.8);
  Rng rng(17);
  int checked = 0;
  while (checked < 50) {
    const PtzState ptz{rng.uniform(-45, 45), rng.uniform(-45, 0), rng.uniform(10, 90)};
    const ObjectState st{{rng.uniform(5, 65), rng.uniform(10, 65)}, rng.uniform(0, 360), 0, false};
    const Visibility v = oracle_bbox(kRig, ptz, s, st);
    if (!v.in_front) continue;
    const BoundingBox h = sampled_hull(ptz, s, st, 10);
    CHECK(std::abs(h.xmin - v.raw_box.xmin) < 1e-6);
    CHECK(std::abs(h.ymin - v.raw_box.ymin) < 1e-6);
    CHECK(std::abs(h.xmax - v.raw_box.xmax) < 1e-6);
    CHECK(std::abs(h.ymax - v.raw_box.ymax) < 1e-6);
    ++checked;
  }
}

TEST_CASE("halving tan(fov/2) doubles extents from the center") {
  const ObjectSpec s = box_spec(4.6, 1.9, 1.8);
  Rng rng(23);
  int checked = 0;
  while (checked < 100) {
    const PtzState ptz{rng.uniform(-30, 30), rng.uniform(-30, -5), rng.uniform(30, 90)};
    const ObjectState st{{rng.uniform(5, 65), rng.uniform(10, 65)}, rng.uniform(0, 360), 0, false};
    const Visibility v = oracle_bbox(kRig, ptz, s, st);
    if (!v.visible || v.clipped) continue;
    PtzState zoomed = ptz;
    zoomed.fov = rad2deg(2.0 * std::atan(std::tan(deg2rad(ptz.fov) / 2.0) / 2.0));
    const Visibility z = oracle_bbox(kRig, zoomed, s, st);
    REQUIRE(z.in_front);
    CHECK(std::abs((z.raw_box.xmin - 60) - 2 * (v.raw_box.xmin - 60)) < 1e-6);
    CHECK(std::abs((z.raw_box.xmax - 60) - 2 * (v.raw_box.xmax - 60)) < 1e-6);
    CHECK(std::abs((z.raw_box.ymin - 60) - 2 * (v.raw_box.ymin - 60)) < 1e-6);
    CHECK(std::abs((z.raw_box.ymax - 60) - 2 * (v.raw_box.ymax - 60)) < 1e-6);
    ++checked;
  }
}

TEST_CASE("zooming in grows an unclipped box") {
  const ObjectSpec s = box_spec(4.6, 1.9, 1.8);
  PtzState ptz{0, -13, 90};
  const ObjectState st{{35, 40}, 30, 0, false};
  Visibility v = oracle_bbox(kRig, ptz, s, st);
  REQUIRE(v.visible);
  double prev = v.clipped_box.area();
  while (ptz.fov > kFovMin) {
    ptz = apply_action(ptz, {Move::none, Move::none, Move::minus}).state;
    v = oracle_bbox(kRig, ptz, s, st);
    if (!v.visible || v.clipped) break;
    CHECK(v.clipped_box.area() > prev);
    prev = v.clipped_box.area();
  }
}
