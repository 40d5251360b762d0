#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ptz/environment.hpp"
#include "ptz/kalman.hpp"

namespace ptz {

struct ControllerParams {
  double dead_zone_x = 6.0;  // px
  double dead_zone_y = 6.0;  // px
  double zoom_low = 0.15;    // box area / image area
  double zoom_high = 0.35;
  bool clip_zoom_out = true;
  friend bool operator==(const ControllerParams&, const ControllerParams&) = default;
};

void validate(const ControllerParams& p);
std::string params_to_json(const ControllerParams& p);
/// Throws std::invalid_argument on malformed documents or out-of-range values.
ControllerParams params_from_json(std::string_view text);

/// Stateless dead-zone controller. `box` nullopt means no track.
PtzAction rule_control(const std::optional<BoundingBox>& box, bool clipped, const ControllerParams& params, double W,
                       double H);

struct RelativeLocation {
  double rel_x = 0.0;
  double rel_y = 0.0;
  double rel_zoom = 0.0;
};

RelativeLocation relloc_from_bbox(const BoundingBox& box, double W, double H);
/// Box with the given center and area, shaped like the image.
BoundingBox bbox_from_relloc(const RelativeLocation& rel, double W, double H);

class ZeroController : public Controller {
 public:
  InputKind input_kind() const override { return InputKind::none; }
  PtzAction act(const ControllerInput&) override { return kNoop; }
  std::unique_ptr<Controller> clone() const override { return std::make_unique<ZeroController>(*this); }
};

class RandomController : public Controller {
 public:
  InputKind input_kind() const override { return InputKind::none; }
  void reset(std::uint64_t seed) override { rng_ = Rng(seed, "random-controller"); }
  PtzAction act(const ControllerInput&) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<RandomController>(*this); }

 private:
  Rng rng_;
};

/// Oracle boxes, Kalman smoothing, rule controller.
class PerfectBBKalmanController : public Controller {
 public:
  static constexpr int kMaxCoast = 5;

  explicit PerfectBBKalmanController(ControllerParams params = {}, KalmanConfig kcfg = {})
      : params_(params), kcfg_(std::move(kcfg)), track_(kcfg_) {}
  InputKind input_kind() const override { return InputKind::oracle_box; }
  void reset(std::uint64_t seed) override;
  PtzAction act(const ControllerInput& in) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<PerfectBBKalmanController>(*this); }

  const ControllerParams& params() const { return params_; }

 private:
  ControllerParams params_;
  KalmanConfig kcfg_;
  KalmanTrack track_;
  int misses_ = 0;
};

}  // namespace ptz
