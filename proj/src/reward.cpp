#include "ptz/reward.hpp"

#include <cmath>

namespace ptz {

CenterTerms centering_terms(const BoundingBox& box, double W, double H) {
  const Vec2 c = box.center();
  return {1.0 - std::abs(W / 2.0 - c.x) / (W / 2.0), 1.0 - std::abs(H / 2.0 - c.y) / (H / 2.0)};
}

double obj_size(const BoundingBox& box, double W, double H) { return box.area() / (W * H); }

double clip_factor(const Visibility& vis, double M) { return vis.clipped ? M : 1.0; }

bool condition(const Visibility& vis, int object_id, const TrackingTask& task) {
  if (!vis.visible) return false;
  if (!task.dt_enabled) return task.trackable_ids.contains(object_id);
  const auto it = task.subclass_of.find(object_id);
  if (it == task.subclass_of.end()) return false;
  return (it->second == 0 && task.ci == 0) || (it->second == 1 && task.ci == 1);
}

RewardBreakdown step_reward(const Visibility& vis, int object_id, const TrackingTask& task, const RewardConfig& cfg,
                            bool action_changed, double W, double H) {
  RewardBreakdown b;
  b.action_changed = action_changed;
  b.condition = condition(vis, object_id, task);
  if (!b.condition) {
    b.reward = -cfg.L;
    return b;
  }
  const CenterTerms c = centering_terms(vis.clipped_box, W, H);
  b.center_x = c.x;
  b.center_y = c.y;
  b.obj_size = obj_size(vis.clipped_box, W, H);
  b.clip_factor = clip_factor(vis, cfg.M);
  const double penalty = (action_changed || !cfg.penalize_only_on_change) ? cfg.P : 0.0;
  b.reward = b.center_x * b.center_y * b.obj_size * b.clip_factor - penalty;
  return b;
}

EpisodeMetrics accumulate(EpisodeMetrics m, const RewardBreakdown& b, bool visible) {
  m.episode_return += b.reward;
  m.steps += 1;
  if (visible) {
    m.visible_steps += 1;
    const double n = m.visible_steps;
    m.mean_center_x += (b.center_x - m.mean_center_x) / n;
    m.mean_center_y += (b.center_y - m.mean_center_y) / n;
    m.mean_obj_size += (b.obj_size - m.mean_obj_size) / n;
  }
  m.pct_tracking = 100.0 * m.visible_steps / m.steps;
  return m;
}

}  // namespace ptz
