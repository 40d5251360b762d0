#include "ptz/supervised.hpp"

#include <algorithm>
#include <cstring>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ptz/frame.hpp"
#include "ptz/io_util.hpp"

namespace ptz {

namespace {
constexpr int kRecenterEvery = 15;
}  // namespace

std::string_view to_string(SupervisedTask t) { return t == SupervisedTask::relloc ? "relloc" : "detector"; }

SupervisedTask parse_task(std::string_view s) {
  if (s == "relloc") return SupervisedTask::relloc;
  if (s == "detector") return SupervisedTask::detector;
  throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected relloc or detector)");
}

int target_dim(SupervisedTask t) { return t == SupervisedTask::relloc ? 3 : 4; }
HeadSet head_for(SupervisedTask t) { return t == SupervisedTask::relloc ? HeadSet::relloc : HeadSet::detector; }

std::vector<float> supervised_target(SupervisedTask t, const BoundingBox& b, double W, double H) {
  if (t == SupervisedTask::relloc) {
    const RelativeLocation r = relloc_from_bbox(b, W, H);
    return {static_cast<float>(r.rel_x), static_cast<float>(r.rel_y), static_cast<float>(r.rel_zoom)};
  }
  return {static_cast<float>(b.xmin / W), static_cast<float>(b.ymin / H), static_cast<float>(b.xmax / W),
          static_cast<float>(b.ymax / H)};
}

std::size_t Dataset::size() const {
  const std::size_t px = static_cast<std::size_t>(obs_size) * obs_size;
  return px == 0 ? 0 : images.size() / px;
}

const std::uint8_t* Dataset::image(std::size_t i) const {
  return images.data() + i * static_cast<std::size_t>(obs_size) * obs_size;
}

const float* Dataset::target(std::size_t i) const {
  return targets.data() + i * static_cast<std::size_t>(target_dim(task));
}

Dataset generate_dataset(const GenDatasetConfig& cfg) {
  if (cfg.samples < 0) throw std::invalid_argument("samples must be non-negative");
  if (cfg.samples_per_episode < 1) throw std::invalid_argument("samples_per_episode must be positive");
  EnvConfig ecfg = cfg.env;
  ecfg.training_mode = false;
  Environment env(ecfg);
  const CameraRig& rig = env.oracle_rig();
  const double W = rig.width;
  const double H = rig.height;

  Dataset ds;
  ds.task = cfg.task;
  ds.obs_size = ecfg.obs_size;
  Rng rng(cfg.seed, "dataset");
  auto recenter = [&] {
    const SceneObject& t = env.world().target();
    const Vec3 center{t.state.position.x, t.state.position.y, t.spec.dims.height / 2.0};
    const double fov = rng.uniform(15.0, kFovMax);
    PtzState pose = look_at(rig, center, fov);
    pose.pan += rng.uniform(-0.3, 0.3) * fov;
    pose.tilt += rng.uniform(-0.3, 0.3) * vertical_fov(fov, W, H);
    env.set_render(false);
    env.set_ptz(pose);
  };

  std::uint64_t episode = 0;
  int in_episode = cfg.samples_per_episode;
  int since_recenter = 0;
  int recorded = 0;
  while (recorded < cfg.samples) {
    if (in_episode >= cfg.samples_per_episode || env.done()) {
      env.set_render(false);
      env.reset(derive_seed(cfg.seed, "dataset-episode", episode++));
      in_episode = 0;
      recenter();
      since_recenter = 0;
    } else if (since_recenter >= kRecenterEvery || !env.visibility().visible) {
      recenter();
      since_recenter = 0;
    }
    const bool record = rng.bernoulli(1.0 / 3.0);
    env.set_render(record);
    const StepResult r = env.step(PtzAction::from_index(static_cast<int>(rng.below(27))));
    ++since_recenter;
    if (!record || !r.info.vis.visible) continue;
    ds.images.insert(ds.images.end(), r.obs.bytes.begin(), r.obs.bytes.end());
    const std::vector<float> y = supervised_target(cfg.task, r.info.vis.clipped_box, W, H);
    ds.targets.insert(ds.targets.end(), y.begin(), y.end());
    ++recorded;
    ++in_episode;
  }
  return ds;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  const std::size_t n = ds.size();
  const int dim = target_dim(ds.task);
  const std::size_t px = static_cast<std::size_t>(ds.obs_size) * ds.obs_size;
  std::string out;
  out.reserve(n * (px + sizeof(float) * static_cast<std::size_t>(dim)));
  for (std::size_t i = 0; i < n; ++i) {
    out.append(reinterpret_cast<const char*>(ds.image(i)), px);
    for (int d = 0; d < dim; ++d) {
      char buf[sizeof(float)];
      std::memcpy(buf, ds.target(i) + d, sizeof(float));
      out.append(buf, sizeof(float));
    }
  }
  nlohmann::ordered_json j;
  j["format"] = "ptzsim-dataset";
  j["version"] = 1;
  j["task"] = std::string(to_string(ds.task));
  j["records"] = n;
  j["obs_size"] = ds.obs_size;
  j["target_dim"] = dim;
  j["record_bytes"] = px + sizeof(float) * static_cast<std::size_t>(dim);
  write_file_atomic(path, out);
  write_file_atomic(sidecar_path(path), j.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset sidecar: ") + e.what());
  }
  Dataset ds;
  std::size_t n = 0;
  try {
    ds.task = parse_task(j.at("task").get<std::string>());
    ds.obs_size = j.at("obs_size").get<int>();
    n = j.at("records").get<std::size_t>();
    if (j.at("target_dim").get<int>() != target_dim(ds.task)) throw FormatError("dataset target_dim mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset sidecar: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("dataset sidecar: ") + e.what());
  }
  if (ds.obs_size <= 0) throw FormatError("dataset sidecar: bad obs_size");
  const std::string bytes = read_file(path);
  const int dim = target_dim(ds.task);
  const std::size_t px = static_cast<std::size_t>(ds.obs_size) * ds.obs_size;
  const std::size_t rec = px + sizeof(float) * static_cast<std::size_t>(dim);
  if (bytes.size() != n * rec) throw FormatError("dataset file size does not match its sidecar");
  ds.images.resize(n * px);
  ds.targets.resize(n * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const char* r = bytes.data() + i * rec;
    std::memcpy(ds.images.data() + i * px, r, px);
    std::memcpy(ds.targets.data() + i * static_cast<std::size_t>(dim), r + px, sizeof(float) * static_cast<std::size_t>(dim));
  }
  return ds;
}

bool is_validation(std::size_t i) { return mix64(static_cast<std::uint64_t>(i)) % 5 == 0; }

namespace {

void image_input(const Dataset& ds, std::size_t i, AlignedVector<float>& out) {
  const std::size_t px = static_cast<std::size_t>(ds.obs_size) * ds.obs_size;
  out.resize(px);
  const std::uint8_t* im = ds.image(i);
  for (std::size_t k = 0; k < px; ++k) out[k] = static_cast<float>(im[k]) / 255.0f;
}

void check_fit(const NetworkSpec& spec, const Dataset& ds) {
  if (spec.trunk != Trunk::image_cnn || spec.heads != head_for(ds.task))
    throw std::invalid_argument("network does not fit the dataset task");
  if (spec.input_w != ds.obs_size || spec.input_h != ds.obs_size || spec.input_c != 1)
    throw std::invalid_argument("network input does not match the dataset images");
  if (spec.ci_injection) throw std::invalid_argument("supervised networks take no contextual input");
}

}  // namespace

double mse(const Network& net, const std::vector<double>& params, const Dataset& ds, bool validation) {
  check_fit(net.spec(), ds);
  const int dim = target_dim(ds.task);
  const AlignedVector<float> pf(params.begin(), params.end());
  AlignedVector<float> input;
  ForwardCache<float> cache;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (is_validation(i) != validation) continue;
    image_input(ds, i, input);
    net.forward(pf.data(), input.data(), std::nullopt, cache);
    for (int d = 0; d < dim; ++d) {
      const double e = cache.outputs[static_cast<std::size_t>(d)] - ds.target(i)[d];
      sum += e * e;
    }
    ++count;
  }
  if (count == 0) throw std::invalid_argument("empty split");
  return sum / static_cast<double>(count * static_cast<std::size_t>(dim));
}

double mean_predictor_loss(const Dataset& ds) {
  const int dim = target_dim(ds.task);
  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  std::size_t n_train = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (is_validation(i)) continue;
    for (int d = 0; d < dim; ++d) mean[static_cast<std::size_t>(d)] += ds.target(i)[d];
    ++n_train;
  }
  if (n_train == 0) throw std::invalid_argument("empty training split");
  for (double& m : mean) m /= static_cast<double>(n_train);
  double sum = 0.0;
  std::size_t n_val = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!is_validation(i)) continue;
    for (int d = 0; d < dim; ++d) {
      const double e = mean[static_cast<std::size_t>(d)] - ds.target(i)[d];
      sum += e * e;
    }
    ++n_val;
  }
  if (n_val == 0) throw std::invalid_argument("empty validation split");
  return sum / static_cast<double>(n_val * static_cast<std::size_t>(dim));
}

SupervisedResult supervised_train(const NetworkSpec& spec, const Dataset& ds, const SupervisedConfig& cfg) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  if (cfg.epochs < 0 || cfg.batch < 1 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("invalid supervised training config");
  check_fit(spec, ds);
  const Network net(spec);
  const int dim = target_dim(ds.task);

  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!is_validation(i)) train.push_back(i);
  if (train.empty() || train.size() == ds.size()) throw std::invalid_argument("dataset too small for a train/validation split");

  SupervisedResult res;
  res.params = net.init_params(derive_seed(cfg.seed, "supervised-init"));
  res.mean_predictor_val_loss = mean_predictor_loss(ds);
  AdamState opt(res.params.size());
  Rng rng(cfg.seed, "supervised-shuffle");
  AlignedVector<float> pf(res.params.size());
  AlignedVector<float> grad(res.params.size());
  std::vector<double> gd(res.params.size());
  AlignedVector<float> input;
  AlignedVector<float> d_out(static_cast<std::size_t>(dim));
  ForwardCache<float> cache;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(cfg.batch));
      const double scale = 1.0 / static_cast<double>((end - start) * static_cast<std::size_t>(dim));
      std::copy(res.params.begin(), res.params.end(), pf.begin());
      std::fill(grad.begin(), grad.end(), 0.0f);
      double batch_loss = 0.0;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = train[j];
        image_input(ds, i, input);
        net.forward(pf.data(), input.data(), std::nullopt, cache);
        for (int d = 0; d < dim; ++d) {
          const double e = static_cast<double>(cache.outputs[static_cast<std::size_t>(d)]) - ds.target(i)[d];
          batch_loss += e * e;
          d_out[static_cast<std::size_t>(d)] = static_cast<float>(2.0 * e * scale);
        }
        net.backward(pf.data(), cache, d_out.data(), grad.data());
      }
      std::copy(grad.begin(), grad.end(), gd.begin());
      adam_step(res.params, gd, opt, cfg.learning_rate);
      loss_sum += batch_loss * scale;
      ++batches;
    }
    res.curve.push_back({epoch, loss_sum / batches, mse(net, res.params, ds, true)});
  }
  return res;
}

std::string supervised_curve_csv(const SupervisedResult& r) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,mean_predictor_val_loss\n";
  for (const auto& e : r.curve)
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(r.mean_predictor_val_loss) << '\n';
  return os.str();
}

// ---- controller ----

RegressionNetController::RegressionNetController(NetworkSpec spec, const std::vector<double>& params,
                                                 ControllerParams rule)
    : net_(std::make_shared<const Network>(std::move(spec))), rule_(rule) {
  const HeadSet h = net_->spec().heads;
  if (net_->spec().trunk != Trunk::image_cnn || (h != HeadSet::relloc && h != HeadSet::detector))
    throw std::invalid_argument("regression controller needs an image network with a relloc or detector head");
  if (params.size() != net_->param_count()) throw std::invalid_argument("parameter count does not match the network");
  validate(rule_);
  params_ = std::make_shared<const AlignedVector<float>>(params.begin(), params.end());
}

BoundingBox RegressionNetController::predict(const Observation& obs, std::optional<int> ci, double W, double H) {
  const NetworkSpec& spec = net_->spec();
  if (obs.image.pixels.size() != static_cast<std::size_t>(input_size(spec)))
    throw std::invalid_argument("observation does not match the network input");
  input_.assign(obs.image.pixels.begin(), obs.image.pixels.end());
  std::optional<double> c;
  if (spec.ci_injection) c = ci ? std::optional<double>(*ci) : std::optional<double>(0.0);
  net_->forward(params_->data(), input_.data(), c, cache_);
  const auto& o = cache_.outputs;
  if (spec.heads == HeadSet::relloc) return bbox_from_relloc({o[0], o[1], o[2]}, W, H);
  return {o[0] * W, o[1] * H, o[2] * W, o[3] * H};
}

PtzAction RegressionNetController::act(const ControllerInput& in) {
  if (in.obs == nullptr) throw std::invalid_argument("regression controller needs an observation");
  const double W = in.width;
  const double H = in.height;
  const BoundingBox b = predict(*in.obs, in.ci, W, H);
  const bool touches = b.xmin <= 0.0 || b.ymin <= 0.0 || b.xmax >= W || b.ymax >= H;
  return rule_control(b, touches, rule_, W, H);
}

}  // namespace ptz
