#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ptz/controllers.hpp"

namespace ptz {

using ControllerFactory = std::function<std::unique_ptr<Controller>(const ControllerParams&)>;

struct TuneTrial {
  int index = 0;
  ControllerParams params;
  double score = 0.0;         // mean episode return
  double pct_tracking = 0.0;  // mean, for reporting
  double best_so_far = 0.0;
};

struct TuneResult {
  ControllerParams best;
  double best_score = 0.0;
  int best_index = -1;
  std::vector<TuneTrial> history;
};

/// Sampling ranges: dead zones U[0, 30] px, zoom_low U[0.01, 0.30],
/// zoom_high U[zoom_low + 0.02, 0.60], clip_zoom_out a fair coin.
ControllerParams sample_params(Rng& rng);

/// Seeds of the episode set shared by every trial.
std::vector<std::uint64_t> tuning_seeds(std::uint64_t seed, int episodes);

/// Random search. Trial 0 scores the default parameters; trials 1.. are random draws.
/// Ties go to the lowest trial index. Budget 0 returns the defaults unscored.
TuneResult tune_controller(const ControllerFactory& factory, const EnvConfig& cfg, int budget,
                           int episodes_per_trial, std::uint64_t seed, int threads = 1);

std::string tune_history_csv(const TuneResult& r);

}  // namespace ptz
