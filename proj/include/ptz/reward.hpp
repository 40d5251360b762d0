#pragma once

#include <map>
#include <optional>
#include <set>

#include "ptz/camera.hpp"

namespace ptz {

struct RewardConfig {
  double L = 10.0;  // lost-target penalty
  double M = 0.3;   // clip multiplier
  double P = 0.01;  // action penalty
  bool penalize_only_on_change = true;
};

struct TrackingTask {
  std::set<int> trackable_ids;
  std::map<int, int> subclass_of;
  bool dt_enabled = false;
  int ci = 0;
};

struct RewardBreakdown {
  double center_x = 0.0;
  double center_y = 0.0;
  double obj_size = 0.0;
  double clip_factor = 1.0;
  bool condition = false;
  bool action_changed = false;
  double reward = 0.0;
  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct EpisodeMetrics {
  double pct_tracking = 0.0;
  double mean_center_x = 0.0;
  double mean_center_y = 0.0;
  double mean_obj_size = 0.0;
  double episode_return = 0.0;
  int steps = 0;
  int visible_steps = 0;
};

struct CenterTerms {
  double x = 0.0;
  double y = 0.0;
};

CenterTerms centering_terms(const BoundingBox& box, double W, double H);
double obj_size(const BoundingBox& box, double W, double H);
double clip_factor(const Visibility& vis, double M);
bool condition(const Visibility& vis, int object_id, const TrackingTask& task);
RewardBreakdown step_reward(const Visibility& vis, int object_id, const TrackingTask& task, const RewardConfig& cfg,
                            bool action_changed, double W, double H);
EpisodeMetrics accumulate(EpisodeMetrics m, const RewardBreakdown& b, bool visible);

}  // namespace ptz
