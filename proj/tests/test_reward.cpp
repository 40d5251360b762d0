#include <doctest.h>

#include <cmath>

#include "ptz/reward.hpp"

using namespace ptz;

namespace {

Visibility visible_box(BoundingBox box, bool clipped) {
  Visibility v;
  v.visible = true;
  v.in_front = true;
  v.raw_box = box;
  v.clipped_box = box;
  v.clipped = clipped;
  return v;
}

TrackingTask single(int id) {
  TrackingTask t;
  t.trackable_ids = {id};
  t.subclass_of = {{id, 0}};
  return t;
}

TrackingTask dt_task(int ci) {
  TrackingTask t;
  t.dt_enabled = true;
  t.trackable_ids = {1, 2};
  t.subclass_of = {{1, 0}, {2, 1}};
  t.ci = ci;
  return t;
}

}  // namespace

TEST_CASE("centering terms") {
  auto c = centering_terms({50, 50, 70, 70}, 120, 120);
  CHECK(c.x == 1.0);
  CHECK(c.y == 1.0);
  c = centering_terms({80, 50, 100, 70}, 120, 120);
  CHECK(c.x == 0.5);
  CHECK(c.y == 1.0);
  c = centering_terms({0, 120, 0, 120}, 120, 120);
  CHECK(c.x == 0.0);
  CHECK(c.y == 0.0);
}

TEST_CASE("object size") {
  CHECK(obj_size({0, 0, 120, 120}, 120, 120) == 1.0);
  CHECK(obj_size({30, 30, 90, 90}, 120, 120) == 0.25);
  CHECK(obj_size({40, 40, 40, 40}, 120, 120) == 0.0);
}

TEST_CASE("clip factor") {
  CHECK(clip_factor(visible_box({10, 10, 20, 20}, false), 0.3) == 1.0);
  CHECK(clip_factor(visible_box({100, 10, 120, 20}, true), 0.3) == 0.3);
}

TEST_CASE("condition") {
  CHECK(condition(visible_box({1, 1, 5, 5}, false), 7, single(7)));
  CHECK_FALSE(condition(visible_box({1, 1, 5, 5}, false), 8, single(7)));
  Visibility hidden;
  CHECK_FALSE(condition(hidden, 7, single(7)));

  const Visibility v = visible_box({1, 1, 5, 5}, false);
  CHECK_FALSE(condition(v, 2, dt_task(0)));
  CHECK(condition(v, 2, dt_task(1)));
  CHECK(condition(v, 1, dt_task(0)));
  CHECK_FALSE(condition(v, 1, dt_task(1)));
}

TEST_CASE("dynamic tasking symmetry") {
  const Visibility v = visible_box({1, 1, 5, 5}, false);
  for (int ci : {0, 1}) {
    for (int id : {1, 2}) {
      TrackingTask swapped = dt_task(1 - ci);
      swapped.subclass_of = {{1, 1}, {2, 0}};
      CHECK(condition(v, id, dt_task(ci)) == condition(v, id, swapped));
    }
  }
}

TEST_CASE("step reward examples") {
  const RewardConfig cfg;
  Visibility hidden;
  CHECK(step_reward(hidden, 1, single(1), cfg, false, 120, 120).reward == -10.0);
  CHECK(step_reward(hidden, 1, single(1), cfg, true, 120, 120).reward == -10.0);

  const auto b = step_reward(visible_box({30, 30, 90, 90}, false), 1, single(1), cfg, false, 120, 120);
  CHECK(b.reward == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(b.condition);

  const auto c = step_reward(visible_box({0, 40, 40, 80}, true), 1, single(1), cfg, true, 120, 120);
  CHECK(c.center_x == doctest::Approx(1.0 / 3.0));
  CHECK(c.center_y == 1.0);
  CHECK(c.obj_size == doctest::Approx(1600.0 / 14400.0));
  CHECK(c.clip_factor == 0.3);
  CHECK(c.reward == doctest::Approx((1.0 / 3.0) * (1600.0 / 14400.0) * 0.3 - 0.01).epsilon(1e-12));
  CHECK(c.reward == doctest::Approx(0.001111).epsilon(1e-3));

  RewardConfig literal = cfg;
  literal.penalize_only_on_change = false;
  CHECK(step_reward(visible_box({30, 30, 90, 90}, false), 1, single(1), literal, false, 120, 120).reward ==
        doctest::Approx(0.24));
}

TEST_CASE("reward bounded above by one") {
  Rng rng(3);
  const RewardConfig cfg;
  for (int i = 0; i < 10000; ++i) {
    double x0 = rng.uniform(0, 120), x1 = rng.uniform(0, 120), y0 = rng.uniform(0, 120), y1 = rng.uniform(0, 120);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    const auto b = step_reward(visible_box({x0, y0, x1, y1}, rng.bernoulli(0.5)), 1, single(1), cfg,
                               rng.bernoulli(0.5), 120, 120);
    REQUIRE(b.reward <= 1.0);
    REQUIRE(b.center_x >= 0.0);
    REQUIRE(b.center_x <= 1.0);
    REQUIRE(b.obj_size <= 1.0);
  }
}

TEST_CASE("terms are scale invariant") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox b{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(60, 120), rng.uniform(60, 120)};
    const double k = rng.uniform(0.1, 10.0);
    const BoundingBox s{b.xmin * k, b.ymin * k, b.xmax * k, b.ymax * k};
    const auto c1 = centering_terms(b, 120, 120);
    const auto c2 = centering_terms(s, 120 * k, 120 * k);
    CHECK(c1.x == doctest::Approx(c2.x).epsilon(1e-12));
    CHECK(c1.y == doctest::Approx(c2.y).epsilon(1e-12));
    CHECK(obj_size(b, 120, 120) == doctest::Approx(obj_size(s, 120 * k, 120 * k)).epsilon(1e-12));
  }
}

TEST_CASE("accumulate") {
  EpisodeMetrics m;
  RewardBreakdown b;
  b.reward = 0.5;
  b.center_x = 0.8;
  b.center_y = 0.6;
  b.obj_size = 0.2;
  RewardBreakdown lost;
  lost.reward = -10.0;
  double sum = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const bool vis = i % 2 == 0;
    m = accumulate(m, vis ? b : lost, vis);
    sum += vis ? b.reward : lost.reward;
  }
  CHECK(m.steps == 2000);
  CHECK(m.pct_tracking == 50.0);
  CHECK(m.episode_return == doctest::Approx(sum));
  CHECK(m.mean_center_x == doctest::Approx(0.8));
  CHECK(m.mean_obj_size == doctest::Approx(0.2));

  EpisodeMetrics all;
  for (int i = 0; i < 2000; ++i) all = accumulate(all, b, true);
  CHECK(all.pct_tracking == 100.0);
}
