#pragma once

#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "ptz/camera.hpp"

namespace ptz {

using KVec7 = Eigen::Matrix<double, 7, 1>;
using KMat7 = Eigen::Matrix<double, 7, 7>;
using KVec4 = Eigen::Matrix<double, 4, 1>;

struct KalmanConfig {
  // State order: u, v, s, r, du, dv, ds.
  KVec7 q_diag = (KVec7() << 1.0, 1.0, 1.0, 1e-4, 0.01, 0.01, 0.01).finished();
  KVec4 r_diag = (KVec4() << 1.0, 1.0, 10.0, 0.01).finished();
  double init_velocity_var = 1e4;
};

/// Measurement vector (u, v, s, r) of a box: center, area, width/height.
KVec4 box_to_z(const BoundingBox& box);
BoundingBox z_to_box(double u, double v, double s, double r);

/// SORT-style constant-velocity filter over box center, area and aspect.
class KalmanTrack {
 public:
  explicit KalmanTrack(KalmanConfig cfg = {});

  bool initialized() const { return initialized_; }
  const KVec7& state() const { return x_; }
  const KMat7& covariance() const { return P_; }

  /// Propagates `steps` frames; returns the predicted box. Throws std::logic_error before the first update.
  BoundingBox predict(int steps = 1);
  /// Measurement update; nullopt is a miss and leaves the state untouched.
  void update(const std::optional<BoundingBox>& measured);

  BoundingBox box() const;

 private:
  KalmanConfig cfg_;
  bool initialized_ = false;
  KVec7 x_ = KVec7::Zero();
  KMat7 P_ = KMat7::Zero();
};

}  // namespace ptz
