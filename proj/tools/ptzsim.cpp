#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "ptz/controllers.hpp"
#include "ptz/environment.hpp"
#include "ptz/io_util.hpp"
#include "ptz/model_io.hpp"
#include "ptz/nn.hpp"
#include "ptz/policy.hpp"
#include "ptz/protocol.hpp"
#include "ptz/supervised.hpp"
#include "ptz/tuner.hpp"
#include "ptz/video_ptz.hpp"

namespace fs = std::filesystem;
using namespace ptz;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitProtocol = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ScenarioSpec scenario_arg(const std::string& name) {
  const auto id = parse_scenario_id(name);
  if (!id) throw UsageError("unknown scenario '" + name + "'");
  return scenario(*id);
}

EvalVariation variation_arg(const std::string& name) {
  const auto v = parse_variation(name);
  if (!v) throw UsageError("unknown variation '" + name + "'");
  return *v;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

/// zero | random | perfectbb-kalman[:params.json] | policy:model | bbox-mlp:model | relloc-net:model | detector-net:model
std::unique_ptr<Controller> make_controller(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  auto need_arg = [&] {
    if (arg.empty()) throw UsageError("controller '" + kind + "' needs a file argument (" + kind + ":path)");
  };
  if (kind == "zero" && arg.empty()) return std::make_unique<ZeroController>();
  if (kind == "random" && arg.empty()) return std::make_unique<RandomController>();
  if (kind == "perfectbb-kalman") {
    ControllerParams p;
    if (!arg.empty()) {
      try {
        p = params_from_json(read_file(arg));
      } catch (const std::invalid_argument& e) {
        throw FormatError(arg + ": " + e.what());
      }
    }
    return std::make_unique<PerfectBBKalmanController>(p);
  }
  if (kind == "policy") {
    need_arg();
    const ModelFile m = load_model(arg, Trunk::image_cnn);
    if (!has_policy(m.spec.heads))
      throw ModelError(ModelError::Code::architecture_mismatch, arg + " has no policy head");
    return std::make_unique<PolicyController>(m.spec, m.params);
  }
  if (kind == "bbox-mlp") {
    need_arg();
    const ModelFile m = load_model(arg, Trunk::bbox_mlp);
    if (!has_policy(m.spec.heads))
      throw ModelError(ModelError::Code::architecture_mismatch, arg + " has no policy head");
    return std::make_unique<PolicyController>(m.spec, m.params);
  }
  if (kind == "relloc-net" || kind == "detector-net") {
    need_arg();
    const ModelFile m = load_model(arg, Trunk::image_cnn, kind == "relloc-net" ? HeadSet::relloc : HeadSet::detector);
    return std::make_unique<RegressionNetController>(m.spec, m.params);
  }
  throw UsageError("unknown controller '" + spec + "'");
}

std::string table_text(const EvalTable& t) {
  std::ostringstream os;
  char line[160];
  auto row = [&](const char* name, const MetricSummary& m) {
    std::snprintf(line, sizeof line, "  %-10s %10.4f +- %.4f\n", name, m.mean, m.std);
    os << line;
  };
  row("%Tracking", t.pct_tracking);
  row("Center_x", t.center_x);
  row("Center_y", t.center_y);
  row("Obj_size", t.obj_size);
  row("Return", t.episode_return);
  return os.str();
}

struct EvalArgs {
  std::string scenario, controller, variation = "as_trained", out, per_episode, trace_dir;
  int episodes = 30, episode_len = 2000, threads = 1;
  std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
  EnvConfig cfg;
  cfg.scenario = scenario_arg(a.scenario);
  cfg.variation = variation_arg(a.variation);
  cfg.episode_len = a.episode_len;
  validate(cfg);
  auto ctl = make_controller(a.controller);
  const EvalTable t = evaluate(*ctl, cfg, a.episodes, a.seed, a.threads);
  std::cout << a.controller << " on " << a.scenario << "/" << a.variation << ", " << a.episodes
            << " episodes from seed " << a.seed << "\n"
            << table_text(t);
  if (!a.out.empty()) {
    write_file_atomic(a.out, eval_table_csv(t));
    const fs::path per = a.per_episode.empty() ? sibling(a.out, "_episodes.csv") : fs::path(a.per_episode);
    write_file_atomic(per, per_episode_csv(t, a.seed));
  }
  if (!a.trace_dir.empty()) {
    fs::create_directories(a.trace_dir);
    for (int i = 0; i < a.episodes; ++i) {
      auto c = ctl->clone();
      const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
      const EpisodeResult r = run_episode(*c, cfg, seed);
      write_trace(fs::path(a.trace_dir) / ("trace_seed" + std::to_string(seed) + ".csv"), r.trace);
    }
  }
  return 0;
}

struct TrainPpoArgs {
  std::string scenario = "sc0_static", variation = "as_trained", out, curve, trunk = "image";
  bool ci = false;
  int envs = 4, rollout = 4096, updates = 25, minibatch = 256, epochs = 4, checkpoint_every = 0, episode_len = 2000;
  double lr = 3e-4, entropy_coef = 0.01, reward_scale = 0.1;
  std::uint64_t seed = 0;
};

int run_train_ppo(const TrainPpoArgs& a) {
  TrainPpoConfig c;
  c.env.scenario = scenario_arg(a.scenario);
  c.env.variation = variation_arg(a.variation);
  c.env.episode_len = a.episode_len;
  if (a.trunk != "image" && a.trunk != "bbox") throw UsageError("--trunk must be image or bbox");
  const bool ci = a.ci || c.env.scenario.dt_enabled;
  c.net = a.trunk == "image" ? NetworkSpec::image(HeadSet::policy_value, ci) : NetworkSpec::bbox(HeadSet::policy_value, ci);
  c.ppo.envs = a.envs;
  c.ppo.rollout = a.rollout;
  c.ppo.minibatch = a.minibatch;
  c.ppo.epochs = a.epochs;
  c.ppo.learning_rate = a.lr;
  c.ppo.entropy_coef = a.entropy_coef;
  c.ppo.reward_scale = a.reward_scale;
  c.updates = a.updates;
  c.seed = a.seed;
  try {
    validate(c.ppo);
    validate(c.env);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Network net(c.net);
  std::cerr << "network: " << describe(c.net) << ", " << net.param_count() << " parameters\n";
  const fs::path curve = a.curve.empty() ? sibling(a.out, "_curve.csv") : fs::path(a.curve);
  std::vector<UpdateStats> progress;
  auto res = train_ppo(c, [&](int u, const std::vector<double>& params) {
    if (a.checkpoint_every > 0 && u % a.checkpoint_every == 0 && u < a.updates)
      save_model(sibling(a.out, "_u" + std::to_string(u) + ".bin"), c.net, params);
  });
  for (const auto& s : res.curve) {
    std::fprintf(stderr, "update %3d  steps %7ld  episodes %3d  mean_return %10.3f  entropy %.3f  kl %.4f\n", s.update,
                 s.env_steps, s.episodes, s.mean_return, s.diag.entropy, s.diag.approx_kl);
  }
  save_model(a.out, c.net, res.params);
  write_file_atomic(curve, learning_curve_csv(res.curve));
  std::ostringstream eps;
  eps << "episode,return\n";
  for (std::size_t i = 0; i < res.episode_returns.size(); ++i)
    eps << i + 1 << ',' << format_double(res.episode_returns[i]) << '\n';
  write_file_atomic(sibling(a.out, "_episodes.csv"), eps.str());
  if (!res.episode_returns.empty()) {
    const DecileMeans d = decile_means(res.episode_returns);
    std::cout << "episodes " << res.episode_returns.size() << ", first-decile mean return " << d.first
              << ", final-decile mean return " << d.last << "\n";
  }
  return 0;
}

struct GenDatasetArgs {
  std::string scenario = "sc1", variation = "as_trained", task, out;
  int samples = 0;
  std::uint64_t seed = 0;
};

int run_gen_dataset(const GenDatasetArgs& a) {
  GenDatasetConfig g;
  g.env.scenario = scenario_arg(a.scenario);
  g.env.variation = variation_arg(a.variation);
  try {
    g.task = parse_task(a.task);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  g.samples = a.samples;
  g.seed = a.seed;
  const Dataset ds = generate_dataset(g);
  save_dataset(a.out, ds);
  std::cout << "wrote " << ds.size() << " records to " << a.out << "\n";
  return 0;
}

struct TrainSupArgs {
  std::string task, dataset, out, curve;
  int epochs = 12, batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

int run_train_supervised(const TrainSupArgs& a) {
  SupervisedTask task;
  try {
    task = parse_task(a.task);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = load_dataset(a.dataset);
  if (ds.task != task) throw FormatError("dataset holds " + std::string(to_string(ds.task)) + " targets, not " + a.task);
  NetworkSpec spec = NetworkSpec::image(head_for(task));
  spec.input_w = spec.input_h = ds.obs_size;
  SupervisedConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch = a.batch;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  const SupervisedResult r = supervised_train(spec, ds, cfg);
  for (const auto& e : r.curve)
    std::fprintf(stderr, "epoch %3d  train %.6f  val %.6f  (mean predictor %.6f)\n", e.epoch, e.train_loss, e.val_loss,
                 r.mean_predictor_val_loss);
  save_model(a.out, spec, r.params);
  write_file_atomic(a.curve.empty() ? sibling(a.out, "_curve.csv") : fs::path(a.curve), supervised_curve_csv(r));
  return 0;
}

struct TuneArgs {
  std::string pipeline = "perfectbb-kalman", scenario = "sc1", variation = "as_trained", out, trials;
  int budget = 200, episodes = 5, threads = 1, episode_len = 2000;
  std::uint64_t seed = 0;
};

int run_tune(const TuneArgs& a) {
  if (a.pipeline != "perfectbb-kalman") throw UsageError("unknown pipeline '" + a.pipeline + "'");
  EnvConfig cfg;
  cfg.scenario = scenario_arg(a.scenario);
  cfg.variation = variation_arg(a.variation);
  cfg.episode_len = a.episode_len;
  validate(cfg);
  const ControllerFactory f = [](const ControllerParams& p) { return std::make_unique<PerfectBBKalmanController>(p); };
  const TuneResult r = tune_controller(f, cfg, a.budget, a.episodes, a.seed, a.threads);
  write_file_atomic(a.out, params_to_json(r.best) + "\n");
  write_file_atomic(a.trials.empty() ? sibling(a.out, "_trials.csv") : fs::path(a.trials), tune_history_csv(r));
  std::cout << "best trial " << r.best_index << ", score " << r.best_score << "\n" << params_to_json(r.best) << "\n";
  return 0;
}

int run_render_episode(const std::string& trace_path, const std::string& out_dir) {
  const EpisodeTrace trace = read_trace(trace_path);
  EnvConfig cfg;
  cfg.scenario = scenario(trace.scenario);
  cfg.variation = trace.variation;
  cfg.episode_len = trace.episode_len;
  cfg.obs_size = trace.obs_size;
  cfg.render_size = trace.render_size;
  cfg.camera_height = trace.camera_height;
  validate(cfg);
  Environment env(cfg);
  fs::create_directories(out_dir);
  char name[32];
  auto frame_path = [&](int step) {
    std::snprintf(name, sizeof name, "frame_%06d.pgm", step);
    return fs::path(out_dir) / name;
  };
  write_pgm(frame_path(0), env.reset(trace.seed).image);
  for (const TraceRecord& rec : trace.records) {
    const StepResult r = env.step(rec.action);
    if (!(r.info.ptz == rec.ptz) || r.reward != rec.reward || r.info.vis.visible != rec.visible)
      throw FormatError("trace does not replay at step " + std::to_string(rec.step));
    write_pgm(frame_path(rec.step), r.obs.image);
  }
  std::cout << "wrote " << trace.records.size() + 1 << " frames to " << out_dir << "\n";
  return 0;
}

struct VideoArgs {
  std::string frames, controller = "zero", out, frames_out;
  std::vector<double> init_crop;
  double fov_full = 90.0;
  int obs_size = 120;
};

int run_video(const VideoArgs& a) {
  if (a.init_crop.size() != 3) throw UsageError("--init-crop takes cx,cy,side");
  auto ctl = make_controller(a.controller);
  VideoPtzConfig cfg;
  cfg.fov_full = a.fov_full;
  cfg.obs_size = a.obs_size;
  const CropWindow init{a.init_crop[0], a.init_crop[1], a.init_crop[2], a.init_crop[2]};
  std::optional<fs::path> frames_out;
  if (!a.frames_out.empty()) frames_out = a.frames_out;
  VideoRunResult r;
  try {
    r = run_video_episode(a.frames, init, *ctl, cfg, frames_out);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  write_file_atomic(a.out, crop_trace_csv(r));
  std::cout << "processed " << r.records.size() << " frames\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PTZ camera tracking simulator: evaluation, training, tuning and tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");
  app.get_formatter()->column_width(36);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a controller over seeded episodes");
  eval->add_option("--scenario", ev.scenario, "Scenario id")->required();
  eval->add_option("--controller", ev.controller,
                   "zero | random | perfectbb-kalman[:params.json] | policy:model | bbox-mlp:model | "
                   "relloc-net:model | detector-net:model")
      ->required();
  eval->add_option("--variation", ev.variation, "Evaluation variation")->capture_default_str();
  eval->add_option("--episodes", ev.episodes, "Number of episodes")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--seed", ev.seed, "First episode seed")->capture_default_str();
  eval->add_option("--episode-len", ev.episode_len, "Steps per episode")->capture_default_str();
  eval->add_option("--threads", ev.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--out", ev.out, "Aggregate CSV (metric,mean,std)");
  eval->add_option("--per-episode", ev.per_episode, "Per-episode CSV (default <out>_episodes.csv)");
  eval->add_option("--trace-dir", ev.trace_dir, "Write one trace CSV per episode here");

  TrainPpoArgs tp;
  auto* train_ppo_cmd = app.add_subcommand("train-ppo", "Train a policy with PPO");
  train_ppo_cmd->add_option("--scenario", tp.scenario, "Scenario id")->capture_default_str();
  train_ppo_cmd->add_option("--variation", tp.variation, "Scene variation")->capture_default_str();
  train_ppo_cmd->add_option("--trunk", tp.trunk, "image | bbox")->capture_default_str();
  train_ppo_cmd->add_flag("--ci", tp.ci, "Inject the contextual input (always on for dt)");
  train_ppo_cmd->add_option("--envs", tp.envs, "Parallel environments")->capture_default_str();
  train_ppo_cmd->add_option("--rollout", tp.rollout, "Steps per update across environments")->capture_default_str();
  train_ppo_cmd->add_option("--updates", tp.updates, "Number of updates")->capture_default_str();
  train_ppo_cmd->add_option("--minibatch", tp.minibatch, "Minibatch size")->capture_default_str();
  train_ppo_cmd->add_option("--epochs", tp.epochs, "Epochs per update")->capture_default_str();
  train_ppo_cmd->add_option("--lr", tp.lr, "Adam learning rate")->capture_default_str();
  train_ppo_cmd->add_option("--entropy-coef", tp.entropy_coef, "Entropy bonus weight")->capture_default_str();
  train_ppo_cmd->add_option("--reward-scale", tp.reward_scale, "Reward scale for value targets")->capture_default_str();
  train_ppo_cmd->add_option("--episode-len", tp.episode_len, "Steps per episode")->capture_default_str();
  train_ppo_cmd->add_option("--seed", tp.seed, "Seed")->capture_default_str();
  train_ppo_cmd->add_option("--checkpoint-every", tp.checkpoint_every, "Save <out>_uN.bin every N updates (0 = off)")
      ->capture_default_str();
  train_ppo_cmd->add_option("--out", tp.out, "Model file")->required();
  train_ppo_cmd->add_option("--curve", tp.curve, "Learning-curve CSV (default <out>_curve.csv)");

  TrainSupArgs ts;
  auto* train_sup = app.add_subcommand("train-supervised", "Train a relative-location or detector network");
  train_sup->add_option("--task", ts.task, "relloc | detector")->required();
  train_sup->add_option("--dataset", ts.dataset, "Dataset file from gen-dataset")->required();
  train_sup->add_option("--epochs", ts.epochs, "Epochs")->capture_default_str();
  train_sup->add_option("--batch", ts.batch, "Minibatch size")->capture_default_str();
  train_sup->add_option("--lr", ts.lr, "Adam learning rate")->capture_default_str();
  train_sup->add_option("--seed", ts.seed, "Seed")->capture_default_str();
  train_sup->add_option("--out", ts.out, "Model file")->required();
  train_sup->add_option("--curve", ts.curve, "Loss-curve CSV (default <out>_curve.csv)");

  GenDatasetArgs gd;
  auto* gen = app.add_subcommand("gen-dataset", "Generate labelled observations for supervised training");
  gen->add_option("--scenario", gd.scenario, "Scenario id")->capture_default_str();
  gen->add_option("--variation", gd.variation, "Scene variation")->capture_default_str();
  gen->add_option("--samples", gd.samples, "Number of records")->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--task", gd.task, "relloc | detector")->required();
  gen->add_option("--seed", gd.seed, "Seed")->capture_default_str();
  gen->add_option("--out", gd.out, "Dataset file (sidecar written to <out>.json)")->required();

  TuneArgs tu;
  auto* tune = app.add_subcommand("tune", "Random-search tuning of the rule controller");
  tune->add_option("--pipeline", tu.pipeline, "perfectbb-kalman")->capture_default_str();
  tune->add_option("--scenario", tu.scenario, "Scenario id")->capture_default_str();
  tune->add_option("--variation", tu.variation, "Scene variation")->capture_default_str();
  tune->add_option("--budget", tu.budget, "Number of trials")->capture_default_str()->check(CLI::NonNegativeNumber);
  tune->add_option("--episodes", tu.episodes, "Episodes per trial")->capture_default_str()->check(CLI::PositiveNumber);
  tune->add_option("--episode-len", tu.episode_len, "Steps per episode")->capture_default_str();
  tune->add_option("--threads", tu.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  tune->add_option("--seed", tu.seed, "Seed")->capture_default_str();
  tune->add_option("--out", tu.out, "Best parameters JSON")->required();
  tune->add_option("--trials", tu.trials, "Trial CSV (default <out>_trials.csv)");

  std::string trace_path, render_dir;
  auto* render_cmd = app.add_subcommand("render-episode", "Replay a trace and write its frames as PGM");
  render_cmd->add_option("--trace", trace_path, "Trace CSV")->required();
  render_cmd->add_option("--out-dir", render_dir, "Output directory")->required();

  VideoArgs va;
  auto* video = app.add_subcommand("video-ptz", "Virtual PTZ over a recorded frame sequence");
  video->add_option("--frames", va.frames, "Directory of frame_NNNNNN.pgm/ppm")->required();
  video->add_option("--controller", va.controller, "zero | random | policy:model | relloc-net:model | detector-net:model")
      ->capture_default_str();
  video->add_option("--init-crop", va.init_crop, "Initial crop cx,cy,side in pixels")->required()->delimiter(',');
  video->add_option("--fov-full", va.fov_full, "Degrees spanned by the full frame width")->capture_default_str();
  video->add_option("--obs-size", va.obs_size, "Observation size")->capture_default_str();
  video->add_option("--out", va.out, "Crop trace CSV")->required();
  video->add_option("--frames-out", va.frames_out, "Write observations as PGM here");

  int port = 0;
  bool use_stdio = false;
  int serve_len = 2000;
  auto* serve = app.add_subcommand("serve", "Serve the environment protocol (newline-delimited JSON)");
  auto* port_opt = serve->add_option("--port", port, "TCP port on 127.0.0.1");
  auto* stdio_opt = serve->add_flag("--stdio", use_stdio, "Use standard input and output");
  port_opt->excludes(stdio_opt);
  serve->add_option("--episode-len", serve_len, "Steps per episode")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*eval) return run_eval(ev);
    if (*train_ppo_cmd) return run_train_ppo(tp);
    if (*train_sup) return run_train_supervised(ts);
    if (*gen) return run_gen_dataset(gd);
    if (*tune) return run_tune(tu);
    if (*render_cmd) return run_render_episode(trace_path, render_dir);
    if (*video) return run_video(va);
    if (*serve) {
      if (!use_stdio && port == 0) throw UsageError("serve needs --port or --stdio");
      EnvConfig base;
      base.episode_len = serve_len;
      validate(base);
      if (use_stdio) return serve_stream(std::cin, std::cout, base) == 0 ? 0 : kExitProtocol;
      serve_tcp(port, base);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EnvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
