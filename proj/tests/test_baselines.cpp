#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ptz/controllers.hpp"
#include "ptz/kalman.hpp"
#include "ptz/tuner.hpp"

using namespace ptz;

namespace {

BoundingBox box_at(double u, double v, double s, double r) { return z_to_box(u, v, s, r); }

KalmanConfig exact_config() {
  KalmanConfig k;
  k.q_diag.setZero();
  k.r_diag.setConstant(1e-12);
  return k;
}

}  // namespace

TEST_CASE("box and measurement conversions are inverse") {
  const BoundingBox b{10, 20, 30, 60};
  const KVec4 z = box_to_z(b);
  CHECK(z(0) == 20);
  CHECK(z(1) == 40);
  CHECK(z(2) == 800);
  CHECK(z(3) == 0.5);
  const BoundingBox back = z_to_box(z(0), z(1), z(2), z(3));
  CHECK(back.xmin == doctest::Approx(10));
  CHECK(back.ymax == doctest::Approx(60));
}

TEST_CASE("kalman initialization and prediction") {
  KalmanTrack t;
  CHECK_THROWS_AS(t.predict(), std::logic_error);
  t.update(box_at(10, 10, 100, 1));
  REQUIRE(t.initialized());
  CHECK(t.state()(0) == doctest::Approx(10));
  CHECK(t.state()(4) == 0.0);
  CHECK(t.state()(5) == 0.0);
  const BoundingBox p = t.predict();
  CHECK(p.center().x == doctest::Approx(10));
  CHECK(p.area() == doctest::Approx(100));
}

TEST_CASE("kalman constant velocity step") {
  // Two exact measurements identify the constant-velocity state.
  KalmanTrack e(exact_config());
  e.update(box_at(10, 10, 100, 1));
  e.predict();
  e.update(box_at(12, 14, 100, 1));
  CHECK(e.state()(4) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(e.state()(5) == doctest::Approx(4.0).epsilon(1e-9));
  const BoundingBox p = e.predict();
  CHECK(std::abs(p.center().x - 14.0) < 1e-6);
  CHECK(std::abs(p.center().y - 18.0) < 1e-6);
  CHECK(std::abs(p.area() - 100.0) < 1e-6);
}

TEST_CASE("kalman miss keeps the prior") {
  KalmanTrack t;
  t.update(box_at(10, 10, 100, 1));
  t.predict();
  t.update(box_at(12, 11, 110, 1));
  t.predict();
  const KVec7 prior = t.state();
  t.update(std::nullopt);
  CHECK(t.state() == prior);
}

TEST_CASE("kalman update with tiny R reproduces the measurement") {
  KalmanConfig k;
  k.r_diag.setConstant(1e-14);
  KalmanTrack t(k);
  t.update(box_at(30, 40, 200, 0.8));
  t.predict();
  const BoundingBox m = box_at(33, 38, 230, 0.9);
  t.update(m);
  const KVec4 z = box_to_z(m);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(t.state()(i) - z(i)) < 1e-6);
}

TEST_CASE("kalman posterior matches direct matrix algebra") {
  KalmanTrack t;
  t.update(box_at(30, 40, 200, 0.8));
  t.predict();
  const KVec7 x = t.state();
  const KMat7 P = t.covariance();
  const BoundingBox m = box_at(33, 38, 230, 0.9);
  t.update(m);

  Eigen::Matrix<double, 4, 7> H = Eigen::Matrix<double, 4, 7>::Zero();
  for (int i = 0; i < 4; ++i) H(i, i) = 1.0;
  const Eigen::Matrix4d R = KalmanConfig{}.r_diag.asDiagonal();
  const Eigen::Matrix<double, 7, 4> K = P * H.transpose() * (H * P * H.transpose() + R).inverse();
  const KVec7 expect = x + K * (box_to_z(m) - H * x);
  CHECK((t.state() - expect).norm() < 1e-9);
}

TEST_CASE("kalman covariance stays symmetric PSD") {
  KalmanTrack t;
  Rng rng(2);
  t.update(box_at(60, 60, 400, 1));
  double min_eig = 0.0;
  for (int i = 0; i < 10000; ++i) {
    t.predict();
    if (rng.bernoulli(0.8)) {
      t.update(box_at(rng.uniform(0, 120), rng.uniform(0, 120), rng.uniform(4, 4000), rng.uniform(0.3, 3)));
    } else {
      t.update(std::nullopt);
    }
    const KMat7& P = t.covariance();
    REQUIRE((P - P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<KMat7> es(P);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  CHECK(min_eig >= -1e-9);
}

TEST_CASE("rule controller") {
  const ControllerParams p;
  auto a = rule_control(BoundingBox{75, 55, 85, 65}, false, p, 120, 120);
  CHECK(a.pan == Move::plus);
  CHECK(a.tilt == Move::none);

  a = rule_control(BoundingBox{35, 50, 45, 60}, false, p, 120, 120);
  CHECK(a.pan == Move::minus);

  // Centered, small: zoom in.
  a = rule_control(BoundingBox{47, 47, 73, 73}, false, p, 120, 120);
  CHECK(a == PtzAction{Move::none, Move::none, Move::minus});

  // Clipped: zoom out regardless of size.
  a = rule_control(BoundingBox{47, 47, 73, 73}, true, p, 120, 120);
  CHECK(a.zoom == Move::plus);

  // Below center: tilt down.
  a = rule_control(BoundingBox{50, 80, 70, 100}, false, p, 120, 120);
  CHECK(a.tilt == Move::minus);

  // Centered, mid-band size: no-op.
  a = rule_control(BoundingBox{30, 30, 90, 90}, false, p, 120, 120);
  CHECK(a == kNoop);

  CHECK(rule_control(std::nullopt, false, p, 120, 120) == PtzAction{Move::none, Move::none, Move::plus});
  CHECK(rule_control(BoundingBox{1, 2, 3, 4}, true, p, 120, 120) ==
        rule_control(BoundingBox{1, 2, 3, 4}, true, p, 120, 120));
}

TEST_CASE("relative location") {
  auto r = relloc_from_bbox({30, 30, 90, 90}, 120, 120);
  CHECK(r.rel_x == 0.0);
  CHECK(r.rel_y == 0.0);
  CHECK(r.rel_zoom == 0.25);
  r = relloc_from_bbox({110, 50, 130, 70}, 120, 120);
  CHECK(r.rel_x == 1.0);
  CHECK(relloc_from_bbox({0, 0, 120, 120}, 120, 120).rel_zoom == 1.0);

  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const RelativeLocation in{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1)};
    const auto out = relloc_from_bbox(bbox_from_relloc(in, 160, 120), 160, 120);
    CHECK(out.rel_x == doctest::Approx(in.rel_x));
    CHECK(out.rel_y == doctest::Approx(in.rel_y));
    CHECK(out.rel_zoom == doctest::Approx(in.rel_zoom));
  }
}

TEST_CASE("controller params JSON") {
  ControllerParams p{3.5, 7.25, 0.1, 0.4, false};
  CHECK(params_from_json(params_to_json(p)) == p);
  CHECK_THROWS_AS(params_from_json("{\"zoom_low\":0.5,\"zoom_high\":0.2}"), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json("{"), std::invalid_argument);
}

TEST_CASE("tuner") {
  EnvConfig cfg;
  cfg.scenario = scenario(ScenarioId::sc1);
  cfg.episode_len = 200;
  const ControllerFactory f = [](const ControllerParams& p) { return std::make_unique<PerfectBBKalmanController>(p); };

  const TuneResult none = tune_controller(f, cfg, 0, 2, 1);
  CHECK(none.best == ControllerParams{});
  CHECK(none.history.empty());

  const TuneResult r = tune_controller(f, cfg, 12, 2, 1);
  REQUIRE(r.history.size() == 12);
  CHECK(r.history[0].params == ControllerParams{});
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].best_so_far >= r.history[i - 1].best_so_far);
  CHECK(r.best_score == r.history.back().best_so_far);
  for (const auto& t : r.history) validate(t.params);

  const TuneResult again = tune_controller(f, cfg, 12, 2, 1, 3);
  CHECK(again.best == r.best);
  CHECK(tune_history_csv(again) == tune_history_csv(r));
}
