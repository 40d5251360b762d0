#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ptz/controllers.hpp"
#include "ptz/environment.hpp"
#include "ptz/nn.hpp"

namespace ptz {

enum class SupervisedTask { relloc, detector };

std::string_view to_string(SupervisedTask t);
/// Throws std::invalid_argument.
SupervisedTask parse_task(std::string_view s);
int target_dim(SupervisedTask t);
HeadSet head_for(SupervisedTask t);

/// relloc: (rel_x, rel_y, rel_zoom); detector: clipped box corners divided by the image size.
std::vector<float> supervised_target(SupervisedTask t, const BoundingBox& clipped_box, double W, double H);

struct Dataset {
  SupervisedTask task = SupervisedTask::relloc;
  int obs_size = 120;
  std::vector<std::uint8_t> images;  // obs_size^2 bytes per record
  std::vector<float> targets;        // target_dim floats per record

  std::size_t size() const;
  const std::uint8_t* image(std::size_t i) const;
  const float* target(std::size_t i) const;
};

struct GenDatasetConfig {
  EnvConfig env;
  SupervisedTask task = SupervisedTask::relloc;
  int samples = 1000;
  std::uint64_t seed = 0;
  int samples_per_episode = 25;
};

/// Random actions every step, with the camera re-aimed near the target (random field of view)
/// every 15 steps or when it is lost. About a third of the visible steps are kept.
Dataset generate_dataset(const GenDatasetConfig& cfg);

/// Binary records (image bytes, then little-endian f32 targets) plus a JSON sidecar at `path` + ".json".
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
/// Throws IoError or FormatError.
Dataset load_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Fixed 80/20 split: record i is held out iff mix64(i) % 5 == 0.
bool is_validation(std::size_t i);

struct SupervisedConfig {
  int epochs = 12;
  int batch = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // mean minibatch loss over the epoch
  double val_loss = 0.0;
};

struct SupervisedResult {
  std::vector<double> params;
  std::vector<EpochStats> curve;
  double mean_predictor_val_loss = 0.0;
};

/// Per-element MSE of `params` on one split.
double mse(const Network& net, const std::vector<double>& params, const Dataset& ds, bool validation);
/// MSE on the validation split of predicting the training-split target mean.
double mean_predictor_loss(const Dataset& ds);

/// Throws std::invalid_argument on an empty dataset or an empty split.
SupervisedResult supervised_train(const NetworkSpec& spec, const Dataset& ds, const SupervisedConfig& cfg);

std::string supervised_curve_csv(const SupervisedResult& r);

/// Image network predicting the target location, followed by the rule controller.
class RegressionNetController : public Controller {
 public:
  RegressionNetController(NetworkSpec spec, const std::vector<double>& params, ControllerParams rule = {});
  InputKind input_kind() const override { return InputKind::image; }
  PtzAction act(const ControllerInput& in) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<RegressionNetController>(*this); }

  /// Predicted box in pixels.
  BoundingBox predict(const Observation& obs, std::optional<int> ci, double W, double H);

 private:
  std::shared_ptr<const Network> net_;
  std::shared_ptr<const AlignedVector<float>> params_;
  ControllerParams rule_;
  AlignedVector<float> input_;
  ForwardCache<float> cache_;
};

}  // namespace ptz
