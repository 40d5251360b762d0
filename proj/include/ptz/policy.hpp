#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptz/environment.hpp"
#include "ptz/nn.hpp"

namespace ptz {

/// Network input for the current step: the observation image, or the oracle
/// box scaled to [0,1] (all zeros when the target is not visible).
void policy_input(const NetworkSpec& spec, const Observation* obs, const Visibility& vis, double W, double H,
                  AlignedVector<float>& out);

using HeadActions = std::array<int, 3>;  // per-head indices in {0,1,2}: minus, none, plus

PtzAction to_action(const HeadActions& a);
HeadActions to_head_actions(const PtzAction& a);
HeadActions greedy_action(const float* logits);
HeadActions sample_action(const double* logits, Rng& rng);

/// Runs a policy network as a controller (greedy by default).
class PolicyController : public Controller {
 public:
  PolicyController(NetworkSpec spec, const std::vector<double>& params, bool greedy = true);
  InputKind input_kind() const override;
  void reset(std::uint64_t seed) override;
  PtzAction act(const ControllerInput& in) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<PolicyController>(*this); }

 private:
  std::shared_ptr<const Network> net_;
  std::shared_ptr<const AlignedVector<float>> params_;
  bool greedy_;
  Rng rng_;
  AlignedVector<float> input_;
  ForwardCache<float> cache_;
};

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch = 256;
  int rollout = 4096;  // steps per update, summed over environments
  int envs = 4;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double grad_norm_clip = 0.5;
  bool normalize_advantages = true;
  double reward_scale = 0.1;  // applied to rewards before GAE; lost steps cost -L
};

/// Throws std::invalid_argument.
void validate(const PpoConfig& cfg);

struct Transition {
  std::vector<std::uint8_t> image;  // image trunk
  std::array<float, 4> box{};       // bbox trunk
  std::optional<double> ci;
  HeadActions action{};
  double logprob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;  // episode ended after this step
  double cutoff_value = 0.0;  // critic value of the final observation when done
};

void transition_input(const NetworkSpec& spec, const Transition& t, AlignedVector<float>& out);

/// Scaled rewards for GAE. Episodes here only end by a time or lost-target cutoff, so
/// a done step gets gamma * cutoff_value added.
std::vector<double> gae_rewards(const std::vector<Transition>& steps, const PpoConfig& cfg);

/// GAE over one environment's time-ordered steps. `last_value` bootstraps a
/// trailing non-terminal step. Returns advantages; returns = advantages + values.
std::vector<double> compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<bool>& dones, double last_value, double gamma, double lambda);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;  // before clipping, averaged over minibatches
};

/// Clipped-surrogate epochs over one rollout. `advantages` and `returns` align with `batch`.
PpoDiagnostics ppo_optimize(const Network& net, std::vector<double>& params, AdamState& opt, const PpoConfig& cfg,
                            const std::vector<Transition>& batch, std::vector<double> advantages,
                            const std::vector<double>& returns, Rng& rng);

struct TrainPpoConfig {
  EnvConfig env;  // training_mode is forced on
  PpoConfig ppo;
  NetworkSpec net = NetworkSpec::image(HeadSet::policy_value);
  int updates = 25;
  std::uint64_t seed = 0;
};

struct UpdateStats {
  int update = 0;
  long env_steps = 0;
  int episodes = 0;  // completed during this update's rollout
  double mean_return = 0.0;
  PpoDiagnostics diag;
};

struct TrainPpoResult {
  std::vector<double> params;
  std::vector<UpdateStats> curve;
  std::vector<double> episode_returns;  // completed episodes in order
};

using CheckpointFn = std::function<void(int update, const std::vector<double>& params)>;

TrainPpoResult train_ppo(const TrainPpoConfig& cfg, const CheckpointFn& checkpoint = {});

std::string learning_curve_csv(const std::vector<UpdateStats>& curve);

struct DecileMeans {
  double first = 0.0;
  double last = 0.0;
};
/// Means of the first and last tenth (at least one element) of a sequence.
DecileMeans decile_means(const std::vector<double>& xs);

}  // namespace ptz
