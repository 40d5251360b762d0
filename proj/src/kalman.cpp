#include "ptz/kalman.hpp"

#include <algorithm>
#include <cmath>

namespace ptz {

KVec4 box_to_z(const BoundingBox& box) {
  const double w = box.width();
  const double h = box.height();
  const Vec2 c = box.center();
  return {c.x, c.y, w * h, h > 0.0 ? w / h : 1.0};
}

BoundingBox z_to_box(double u, double v, double s, double r) {
  const double w = std::sqrt(std::max(s * r, 0.0));
  const double h = w > 0.0 ? s / w : 0.0;
  return {u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0};
}

KalmanTrack::KalmanTrack(KalmanConfig cfg) : cfg_(std::move(cfg)) {}

BoundingBox KalmanTrack::box() const { return z_to_box(x_(0), x_(1), x_(2), x_(3)); }

BoundingBox KalmanTrack::predict(int steps) {
  if (!initialized_) throw std::logic_error("kalman predict before first measurement");
  KMat7 F = KMat7::Identity();
  F(0, 4) = 1.0;
  F(1, 5) = 1.0;
  F(2, 6) = 1.0;
  const KMat7 Q = cfg_.q_diag.asDiagonal();
  for (int i = 0; i < steps; ++i) {
    x_ = F * x_;
    // Area cannot go negative; drop the area velocity when it would.
    if (x_(2) <= 0.0) {
      x_(2) = 1e-6;
      x_(6) = 0.0;
    }
    P_ = F * P_ * F.transpose() + Q;
    P_ = (0.5 * (P_ + P_.transpose())).eval();
  }
  return box();
}

void KalmanTrack::update(const std::optional<BoundingBox>& measured) {
  if (!measured) return;
  const KVec4 z = box_to_z(*measured);
  const Eigen::Matrix4d R = cfg_.r_diag.asDiagonal();
  if (!initialized_) {
    x_.setZero();
    x_.head<4>() = z;
    P_.setZero();
    P_.topLeftCorner<4, 4>() = R;
    P_.bottomRightCorner<3, 3>() = Eigen::Matrix3d::Identity() * cfg_.init_velocity_var;
    initialized_ = true;
    return;
  }
  Eigen::Matrix<double, 4, 7> H = Eigen::Matrix<double, 4, 7>::Zero();
  H.leftCols<4>().setIdentity();
  const KVec4 y = z - H * x_;
  const Eigen::Matrix4d S = H * P_ * H.transpose() + R;
  const Eigen::Matrix<double, 7, 4> K = P_ * H.transpose() * S.inverse();
  x_ += K * y;
  const KMat7 I_KH = KMat7::Identity() - K * H;
  P_ = I_KH * P_ * I_KH.transpose() + K * R * K.transpose();
  P_ = (0.5 * (P_ + P_.transpose())).eval();
}

}  // namespace ptz
