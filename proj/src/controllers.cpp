#include "ptz/controllers.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

namespace ptz {

void validate(const ControllerParams& p) {
  if (!(p.dead_zone_x >= 0.0) || !(p.dead_zone_y >= 0.0)) throw std::invalid_argument("dead zones must be >= 0");
  if (!(p.zoom_low > 0.0 && p.zoom_low < p.zoom_high && p.zoom_high < 1.0))
    throw std::invalid_argument("need 0 < zoom_low < zoom_high < 1");
}

std::string params_to_json(const ControllerParams& p) {
  const nlohmann::json j = {{"dead_zone_x", p.dead_zone_x},
                            {"dead_zone_y", p.dead_zone_y},
                            {"zoom_low", p.zoom_low},
                            {"zoom_high", p.zoom_high},
                            {"clip_zoom_out", p.clip_zoom_out}};
  return j.dump(2) + "\n";
}

ControllerParams params_from_json(std::string_view text) {
  ControllerParams p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.dead_zone_x = j.value("dead_zone_x", p.dead_zone_x);
    p.dead_zone_y = j.value("dead_zone_y", p.dead_zone_y);
    p.zoom_low = j.value("zoom_low", p.zoom_low);
    p.zoom_high = j.value("zoom_high", p.zoom_high);
    p.clip_zoom_out = j.value("clip_zoom_out", p.clip_zoom_out);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("controller params: ") + e.what());
  }
  validate(p);
  return p;
}

PtzAction rule_control(const std::optional<BoundingBox>& box, bool clipped, const ControllerParams& params, double W,
                       double H) {
  if (!box) return {Move::none, Move::none, Move::plus};
  PtzAction a;
  const Vec2 c = box->center();
  if (c.x > W / 2.0 + params.dead_zone_x) a.pan = Move::plus;
  if (c.x < W / 2.0 - params.dead_zone_x) a.pan = Move::minus;
  // Image v grows downward; tilting down moves the view toward larger v.
  if (c.y > H / 2.0 + params.dead_zone_y) a.tilt = Move::minus;
  if (c.y < H / 2.0 - params.dead_zone_y) a.tilt = Move::plus;
  const double ratio = box->area() / (W * H);
  if ((clipped && params.clip_zoom_out) || ratio > params.zoom_high) {
    a.zoom = Move::plus;
  } else if (ratio < params.zoom_low && !clipped) {
    a.zoom = Move::minus;
  }
  return a;
}

RelativeLocation relloc_from_bbox(const BoundingBox& box, double W, double H) {
  const Vec2 c = box.center();
  return {(c.x - W / 2.0) / (W / 2.0), (c.y - H / 2.0) / (H / 2.0), box.area() / (W * H)};
}

BoundingBox bbox_from_relloc(const RelativeLocation& rel, double W, double H) {
  const double u = W / 2.0 + rel.rel_x * W / 2.0;
  const double v = H / 2.0 + rel.rel_y * H / 2.0;
  const double k = std::sqrt(std::max(rel.rel_zoom, 0.0));
  const double w = k * W;
  const double h = k * H;
  return {u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0};
}

PtzAction RandomController::act(const ControllerInput&) {
  return PtzAction::from_index(static_cast<int>(rng_.below(27)));
}

void PerfectBBKalmanController::reset(std::uint64_t) {
  track_ = KalmanTrack(kcfg_);
  misses_ = 0;
}

PtzAction PerfectBBKalmanController::act(const ControllerInput& in) {
  if (in.vis == nullptr) throw std::invalid_argument("PerfectBB controller needs oracle visibility");
  if (track_.initialized()) track_.predict();
  if (in.vis->visible) {
    track_.update(in.vis->clipped_box);
    misses_ = 0;
  } else {
    ++misses_;
  }
  std::optional<BoundingBox> est;
  if (track_.initialized() && misses_ <= kMaxCoast) est = track_.box();
  return rule_control(est, in.vis->visible && in.vis->clipped, params_, in.width, in.height);
}

}  // namespace ptz
