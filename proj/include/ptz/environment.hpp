#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptz/camera.hpp"
#include "ptz/frame.hpp"
#include "ptz/render.hpp"
#include "ptz/reward.hpp"
#include "ptz/scene.hpp"

namespace ptz {

struct EnvConfig {
  ScenarioSpec scenario = ptz::scenario(ScenarioId::sc1);
  EvalVariation variation = EvalVariation::as_trained;
  int episode_len = 2000;
  double step_period = 0.030;
  RewardConfig reward;
  int obs_size = 120;
  int render_size = 240;
  bool training_mode = false;
  int max_consecutive_lost = 50;
  double camera_height = 8.0;
};

void validate(const EnvConfig& cfg);

struct Observation {
  Frame image;                      // empty when rendering is disabled
  std::vector<std::uint8_t> bytes;  // quantized image, row-major
  std::optional<int> ci;
};

struct StepInfo {
  int step = 0;  // 1-based index of the completed step
  PtzState ptz;
  PtzAction action;
  bool action_changed = false;
  Visibility vis;
  RewardBreakdown breakdown;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceRecord {
  int step = 0;
  PtzState ptz;
  PtzAction action;
  bool visible = false;
  BoundingBox box;  // clipped box
  bool clipped = false;
  double reward = 0.0;
  std::optional<int> ci;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct EpisodeTrace {
  ScenarioId scenario = ScenarioId::sc1;
  EvalVariation variation = EvalVariation::as_trained;
  std::uint64_t seed = 0;
  int episode_len = 0;
  int obs_size = 0;
  int render_size = 0;
  double camera_height = 8.0;
  std::vector<TraceRecord> records;
};

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  /// Rendering can be skipped for controllers that consume oracle boxes.
  void set_render(bool on) { render_enabled_ = on; }

  Observation reset(std::uint64_t seed);
  StepResult step(const PtzAction& action);
  /// Moves the camera without advancing time or recording a step; returns the new observation.
  Observation set_ptz(const PtzState& ptz);

  const EnvConfig& config() const { return cfg_; }
  const WorldState& world() const { return world_; }
  const PtzState& ptz() const { return ptz_; }
  const TrackingTask& task() const { return task_; }
  const EpisodeTrace& trace() const { return trace_; }
  const EpisodeMetrics& metrics() const { return metrics_; }
  /// Oracle visibility of the target in the current state.
  const Visibility& visibility() const { return vis_; }
  const CameraRig& oracle_rig() const { return oracle_rig_; }
  bool done() const { return done_; }
  std::optional<int> ci() const { return ci_; }

 private:
  Observation observe();

  EnvConfig cfg_;
  CameraRig oracle_rig_;
  CameraRig render_rig_;
  bool render_enabled_ = true;
  WorldState world_;
  PtzState ptz_;
  TrackingTask task_;
  std::optional<int> ci_;
  Rng aug_rng_;
  Visibility vis_;
  EpisodeTrace trace_;
  EpisodeMetrics metrics_;
  int steps_ = 0;
  int consecutive_lost_ = 0;
  bool done_ = true;
  bool started_ = false;
};

Visibility target_visibility(const WorldState& world, const CameraRig& rig, const PtzState& ptz);

enum class InputKind { image, oracle_box, none };

struct ControllerInput {
  const Observation* obs = nullptr;
  const Visibility* vis = nullptr;  // oracle visibility of the target, obs_size rig
  PtzState ptz;
  std::optional<int> ci;
  int width = 120;
  int height = 120;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual InputKind input_kind() const = 0;
  virtual void reset(std::uint64_t /*seed*/) {}
  virtual PtzAction act(const ControllerInput& in) = 0;
  virtual std::unique_ptr<Controller> clone() const = 0;
};

struct EpisodeResult {
  EpisodeTrace trace;
  EpisodeMetrics metrics;
};

EpisodeResult run_episode(Controller& controller, const EnvConfig& cfg, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
};

struct EvalTable {
  MetricSummary pct_tracking;
  MetricSummary center_x;
  MetricSummary center_y;
  MetricSummary obj_size;
  MetricSummary episode_return;
  int episodes = 0;
  std::vector<EpisodeMetrics> per_episode;
};

/// Runs seeds base_seed..base_seed+episodes-1, optionally on `threads` workers.
/// Center and size summaries skip episodes with no visible step.
EvalTable evaluate(const Controller& controller, const EnvConfig& cfg, int episodes, std::uint64_t base_seed,
                   int threads = 1);

/// Reward of one trace row, recomputed from the row and the previous camera state.
/// The target is always the trackable the task asks for, so the condition reduces to `visible`.
RewardBreakdown replay_reward(const TraceRecord& rec, const PtzState& prev_ptz, const RewardConfig& reward, double W,
                              double H);

/// Recomputes metrics from a trace alone.
EpisodeMetrics metrics_from_trace(const EpisodeTrace& trace, const RewardConfig& reward);

std::string trace_to_csv(const EpisodeTrace& trace);
EpisodeTrace trace_from_csv(const std::string& text);
void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace);
EpisodeTrace read_trace(const std::filesystem::path& path);

std::string eval_table_csv(const EvalTable& t);
std::string per_episode_csv(const EvalTable& t, std::uint64_t base_seed);

}  // namespace ptz
