#include "ptz/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <sstream>
#include <thread>

#include "ptz/io_util.hpp"

namespace ptz {

ControllerParams sample_params(Rng& rng) {
  ControllerParams p;
  p.dead_zone_x = rng.uniform(0.0, 30.0);
  p.dead_zone_y = rng.uniform(0.0, 30.0);
  p.zoom_low = rng.uniform(0.01, 0.30);
  p.zoom_high = rng.uniform(p.zoom_low + 0.02, 0.60);
  p.clip_zoom_out = rng.bernoulli(0.5);
  return p;
}

std::vector<std::uint64_t> tuning_seeds(std::uint64_t seed, int episodes) {
  std::vector<std::uint64_t> out;
  for (int k = 0; k < episodes; ++k) out.push_back(derive_seed(seed, "tune-episode", static_cast<std::uint64_t>(k)));
  return out;
}

TuneResult tune_controller(const ControllerFactory& factory, const EnvConfig& cfg, int budget,
                           int episodes_per_trial, std::uint64_t seed, int threads) {
  TuneResult result;
  if (budget <= 0) return result;
  if (episodes_per_trial < 1) throw std::invalid_argument("episodes_per_trial must be >= 1");

  std::vector<TuneTrial> trials(static_cast<std::size_t>(budget));
  Rng rng(seed, "tune-params");
  for (int i = 0; i < budget; ++i) {
    trials[i].index = i;
    trials[i].params = i == 0 ? ControllerParams{} : sample_params(rng);
  }
  const auto seeds = tuning_seeds(seed, episodes_per_trial);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < budget; i = next++) {
      auto ctl = factory(trials[i].params);
      double ret = 0.0;
      double pct = 0.0;
      for (std::uint64_t s : seeds) {
        const auto m = run_episode(*ctl, cfg, s).metrics;
        ret += m.episode_return;
        pct += m.pct_tracking;
      }
      trials[i].score = ret / static_cast<double>(seeds.size());
      trials[i].pct_tracking = pct / static_cast<double>(seeds.size());
    }
  };
  const int n = std::clamp(threads, 1, budget);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  double best = -std::numeric_limits<double>::infinity();
  for (auto& t : trials) {
    if (t.score > best) {
      best = t.score;
      result.best = t.params;
      result.best_index = t.index;
    }
    t.best_so_far = best;
  }
  result.best_score = best;
  result.history = std::move(trials);
  return result;
}

std::string tune_history_csv(const TuneResult& r) {
  std::ostringstream os;
  os << "trial,dead_zone_x,dead_zone_y,zoom_low,zoom_high,clip_zoom_out,score,pct_tracking,best_so_far\n";
  for (const auto& t : r.history) {
    os << t.index << ',' << format_double(t.params.dead_zone_x) << ',' << format_double(t.params.dead_zone_y) << ','
       << format_double(t.params.zoom_low) << ',' << format_double(t.params.zoom_high) << ','
       << (t.params.clip_zoom_out ? 1 : 0) << ',' << format_double(t.score) << ',' << format_double(t.pct_tracking)
       << ',' << format_double(t.best_so_far) << '\n';
  }
  return os.str();
}

}  // namespace ptz
