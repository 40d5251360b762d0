#include "ptz/environment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

#include "ptz/io_util.hpp"

namespace ptz {

void validate(const EnvConfig& cfg) {
  if (cfg.episode_len <= 0) throw EnvError("episode_len must be positive");
  if (!(cfg.step_period > 0.0)) throw EnvError("step_period must be positive");
  if (cfg.obs_size <= 0 || cfg.render_size <= 0 || cfg.render_size % cfg.obs_size != 0)
    throw EnvError("obs_size must divide render_size");
  if (!(cfg.reward.L > 0.0) || !(cfg.reward.M > 0.0 && cfg.reward.M < 1.0) || !(cfg.reward.P > 0.0))
    throw EnvError("reward config out of range");
  if (cfg.max_consecutive_lost < 0) throw EnvError("max_consecutive_lost must be non-negative");
  if (!(cfg.camera_height > 0.0)) throw EnvError("camera_height must be positive");
}

Visibility target_visibility(const WorldState& world, const CameraRig& rig, const PtzState& ptz) {
  const SceneObject& t = world.target();
  return oracle_bbox(rig, ptz, t.spec, t.state);
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  oracle_rig_ = make_rig(cfg_.obs_size, cfg_.camera_height);
  render_rig_ = make_rig(cfg_.render_size, cfg_.camera_height);
}

Observation Environment::reset(std::uint64_t seed) {
  world_ = eval_variation(build_scenario(cfg_.scenario, seed), cfg_.variation);

  ci_.reset();
  task_ = TrackingTask{};
  task_.dt_enabled = cfg_.scenario.dt_enabled;
  if (task_.dt_enabled) {
    Rng ci_rng(seed, "ci");
    ci_ = static_cast<int>(ci_rng.below(2));
    task_.ci = *ci_;
    for (const auto& o : world_.objects) {
      if (o.spec.trackable && o.spec.subclass_id == *ci_) {
        world_.target_id = o.spec.id;
        break;
      }
    }
  }
  for (const auto& o : world_.objects) {
    if (!o.spec.trackable) continue;
    task_.trackable_ids.insert(o.spec.id);
    task_.subclass_of[o.spec.id] = o.spec.subclass_id;
  }

  ptz_ = kInitialPtz;
  vis_ = target_visibility(world_, oracle_rig_, ptz_);
  Rng placement(seed, "reset");
  for (int attempt = 0; attempt < 100 && !vis_.visible; ++attempt) {
    replace_object(world_, world_.target_id, placement);
    vis_ = target_visibility(world_, oracle_rig_, ptz_);
  }
  if (!vis_.visible) throw EnvError("could not place the target in view after 100 draws");

  aug_rng_ = Rng(seed, "augment");
  trace_ = EpisodeTrace{};
  trace_.scenario = cfg_.scenario.id;
  trace_.variation = cfg_.variation;
  trace_.seed = seed;
  trace_.episode_len = cfg_.episode_len;
  trace_.obs_size = cfg_.obs_size;
  trace_.render_size = cfg_.render_size;
  trace_.camera_height = cfg_.camera_height;
  trace_.records.reserve(static_cast<std::size_t>(cfg_.episode_len));
  metrics_ = EpisodeMetrics{};
  steps_ = 0;
  consecutive_lost_ = 0;
  done_ = false;
  started_ = true;
  return observe();
}

Observation Environment::set_ptz(const PtzState& ptz) {
  if (!started_) throw EnvError("set_ptz before reset");
  ptz_ = clamp_ptz(ptz);
  vis_ = target_visibility(world_, oracle_rig_, ptz_);
  return observe();
}

Observation Environment::observe() {
  Observation obs;
  obs.ci = ci_;
  if (!render_enabled_) return obs;
  Frame f = render(world_, render_rig_, ptz_, render_config(world_));
  if (cfg_.scenario.augmentations_enabled) {
    const AugmentationConfig aug = sample_augmentation(aug_rng_);
    f = apply_augmentations(std::move(f), aug, aug_rng_);
  }
  f = downsample(f, cfg_.obs_size, cfg_.obs_size);
  obs.bytes = to_bytes(f);
  obs.image = from_bytes(cfg_.obs_size, cfg_.obs_size, obs.bytes);
  return obs;
}

StepResult Environment::step(const PtzAction& action) {
  if (!started_) throw EnvError("step before reset");
  if (done_) throw EnvError("step after done");

  const ApplyResult ar = apply_action(ptz_, action);
  ptz_ = ar.state;
  world_ = step_world(std::move(world_), cfg_.step_period);
  vis_ = target_visibility(world_, oracle_rig_, ptz_);

  StepResult r;
  r.info.breakdown = step_reward(vis_, world_.target_id, task_, cfg_.reward, ar.changed, oracle_rig_.width,
                                 oracle_rig_.height);
  r.reward = r.info.breakdown.reward;
  metrics_ = accumulate(metrics_, r.info.breakdown, vis_.visible);
  ++steps_;
  consecutive_lost_ = vis_.visible ? 0 : consecutive_lost_ + 1;

  r.info.step = steps_;
  r.info.ptz = ptz_;
  r.info.action = action;
  r.info.action_changed = ar.changed;
  r.info.vis = vis_;

  TraceRecord rec;
  rec.step = steps_;
  rec.ptz = ptz_;
  rec.action = action;
  rec.visible = vis_.visible;
  rec.box = vis_.clipped_box;
  rec.clipped = vis_.clipped;
  rec.reward = r.reward;
  rec.ci = ci_;
  trace_.records.push_back(rec);

  done_ = steps_ >= cfg_.episode_len || (cfg_.training_mode && consecutive_lost_ > cfg_.max_consecutive_lost);
  r.done = done_;
  r.obs = observe();
  return r;
}

EpisodeResult run_episode(Controller& controller, const EnvConfig& cfg, std::uint64_t seed) {
  Environment env(cfg);
  env.set_render(controller.input_kind() == InputKind::image);
  controller.reset(seed);
  Observation obs = env.reset(seed);
  while (!env.done()) {
    ControllerInput in;
    in.obs = &obs;
    in.vis = &env.visibility();
    in.ptz = env.ptz();
    in.ci = env.ci();
    in.width = env.oracle_rig().width;
    in.height = env.oracle_rig().height;
    StepResult r = env.step(controller.act(in));
    obs = std::move(r.obs);
  }
  return {env.trace(), env.metrics()};
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

EvalTable evaluate(const Controller& controller, const EnvConfig& cfg, int episodes, std::uint64_t base_seed,
                   int threads) {
  if (episodes < 1) throw EnvError("evaluate needs at least one episode");
  EvalTable table;
  table.episodes = episodes;
  table.per_episode.resize(static_cast<std::size_t>(episodes));
  std::atomic<int> next{0};
  auto worker = [&] {
    auto ctl = controller.clone();
    for (int i = next++; i < episodes; i = next++) {
      table.per_episode[static_cast<std::size_t>(i)] = run_episode(*ctl, cfg, base_seed + static_cast<std::uint64_t>(i)).metrics;
    }
  };
  const int n = std::clamp(threads, 1, episodes);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<double> pct, cx, cy, size, ret;
  for (const auto& m : table.per_episode) {
    pct.push_back(m.pct_tracking);
    ret.push_back(m.episode_return);
    if (m.visible_steps > 0) {
      cx.push_back(m.mean_center_x);
      cy.push_back(m.mean_center_y);
      size.push_back(m.mean_obj_size);
    }
  }
  table.pct_tracking = summarize(pct);
  table.center_x = summarize(cx);
  table.center_y = summarize(cy);
  table.obj_size = summarize(size);
  table.episode_return = summarize(ret);
  return table;
}

RewardBreakdown replay_reward(const TraceRecord& rec, const PtzState& prev_ptz, const RewardConfig& reward, double W,
                              double H) {
  Visibility vis;
  vis.visible = rec.visible;
  vis.clipped_box = rec.box;
  vis.clipped = rec.clipped;
  TrackingTask task;
  task.trackable_ids = {0};
  return step_reward(vis, 0, task, reward, !(rec.ptz == prev_ptz), W, H);
}

EpisodeMetrics metrics_from_trace(const EpisodeTrace& trace, const RewardConfig& reward) {
  EpisodeMetrics m;
  PtzState prev = kInitialPtz;
  for (const auto& rec : trace.records) {
    m = accumulate(m, replay_reward(rec, prev, reward, trace.obs_size, trace.obs_size), rec.visible);
    prev = rec.ptz;
  }
  return m;
}

// ---- trace CSV ----

namespace {

constexpr const char* kTraceColumns =
    "step,pan,tilt,fov,pan_delta,tilt_delta,fov_delta,visible,xmin,ymin,xmax,ymax,clipped,reward,ci";

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("bad number in trace: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("bad integer in trace: '" + s + "'");
  return v;
}

unsigned long long parse_u64(const std::string& s) {
  unsigned long long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("bad integer in trace: '" + s + "'");
  return v;
}

Move parse_move(const std::string& s, double step) {
  const double d = parse_double(s);
  if (d == 0.0) return Move::none;
  if (d == step) return Move::plus;
  if (d == -step) return Move::minus;
  throw FormatError("bad action delta in trace: " + s);
}

}  // namespace

std::string trace_to_csv(const EpisodeTrace& t) {
  std::ostringstream os;
  os << "# scenario=" << to_string(t.scenario) << " variation=" << to_string(t.variation) << " seed=" << t.seed
     << " episode_len=" << t.episode_len << " obs_size=" << t.obs_size << " render_size=" << t.render_size
     << " camera_height=" << format_double(t.camera_height) << "\n";
  os << kTraceColumns << "\n";
  for (const auto& r : t.records) {
    os << r.step << ',' << format_double(r.ptz.pan) << ',' << format_double(r.ptz.tilt) << ','
       << format_double(r.ptz.fov) << ',' << format_double(r.action.pan_delta()) << ','
       << format_double(r.action.tilt_delta()) << ',' << format_double(r.action.fov_delta()) << ','
       << (r.visible ? 1 : 0) << ',' << format_double(r.box.xmin) << ',' << format_double(r.box.ymin) << ','
       << format_double(r.box.xmax) << ',' << format_double(r.box.ymax) << ',' << (r.clipped ? 1 : 0) << ','
       << format_double(r.reward) << ',';
    if (r.ci) os << *r.ci;
    os << '\n';
  }
  return os.str();
}

EpisodeTrace trace_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  EpisodeTrace t;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw FormatError("trace: missing header comment");
  for (const auto& kv : split(line.substr(2), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "scenario") {
      const auto id = parse_scenario_id(val);
      if (!id) throw FormatError("trace: unknown scenario " + val);
      t.scenario = *id;
    } else if (key == "variation") {
      const auto v = parse_variation(val);
      if (!v) throw FormatError("trace: unknown variation " + val);
      t.variation = *v;
    } else if (key == "seed") {
      t.seed = parse_u64(val);
    } else if (key == "episode_len") {
      t.episode_len = static_cast<int>(parse_int(val));
    } else if (key == "obs_size") {
      t.obs_size = static_cast<int>(parse_int(val));
    } else if (key == "render_size") {
      t.render_size = static_cast<int>(parse_int(val));
    } else if (key == "camera_height") {
      t.camera_height = parse_double(val);
    }
  }
  if (!std::getline(is, line) || line != kTraceColumns) throw FormatError("trace: unexpected column header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 15) throw FormatError("trace: expected 15 columns");
    TraceRecord r;
    r.step = static_cast<int>(parse_int(f[0]));
    r.ptz = {parse_double(f[1]), parse_double(f[2]), parse_double(f[3])};
    r.action = {parse_move(f[4], kPanStep), parse_move(f[5], kTiltStep), parse_move(f[6], kFovStep)};
    r.visible = parse_int(f[7]) != 0;
    r.box = {parse_double(f[8]), parse_double(f[9]), parse_double(f[10]), parse_double(f[11])};
    r.clipped = parse_int(f[12]) != 0;
    r.reward = parse_double(f[13]);
    if (!f[14].empty()) r.ci = static_cast<int>(parse_int(f[14]));
    t.records.push_back(r);
  }
  return t;
}

void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
  write_file_atomic(path, trace_to_csv(trace));
}

EpisodeTrace read_trace(const std::filesystem::path& path) { return trace_from_csv(read_file(path)); }

std::string eval_table_csv(const EvalTable& t) {
  std::ostringstream os;
  os << "metric,mean,std\n";
  auto row = [&](const char* name, const MetricSummary& s) {
    os << name << ',' << format_double(s.mean) << ',' << format_double(s.std) << '\n';
  };
  row("%Tracking", t.pct_tracking);
  row("Center_x", t.center_x);
  row("Center_y", t.center_y);
  row("Obj_size", t.obj_size);
  row("Return", t.episode_return);
  return os.str();
}

std::string per_episode_csv(const EvalTable& t, std::uint64_t base_seed) {
  std::ostringstream os;
  os << "episode,seed,pct_tracking,center_x,center_y,obj_size,return,visible_steps,steps\n";
  for (std::size_t i = 0; i < t.per_episode.size(); ++i) {
    const auto& m = t.per_episode[i];
    os << i << ',' << base_seed + i << ',' << format_double(m.pct_tracking) << ',' << format_double(m.mean_center_x)
       << ',' << format_double(m.mean_center_y) << ',' << format_double(m.mean_obj_size) << ','
       << format_double(m.episode_return) << ',' << m.visible_steps << ',' << m.steps << '\n';
  }
  return os.str();
}

}  // namespace ptz
