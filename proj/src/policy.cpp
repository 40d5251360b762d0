#include "ptz/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ptz/io_util.hpp"

namespace ptz {

void policy_input(const NetworkSpec& spec, const Observation* obs, const Visibility& vis, double W, double H,
                  AlignedVector<float>& out) {
  if (spec.trunk == Trunk::image_cnn) {
    if (obs == nullptr || obs->image.pixels.size() != static_cast<std::size_t>(input_size(spec)))
      throw std::invalid_argument("observation does not match the network input");
    out.assign(obs->image.pixels.begin(), obs->image.pixels.end());
    return;
  }
  out.assign(4, 0.0f);
  if (vis.visible) {
    const BoundingBox& b = vis.clipped_box;
    out[0] = static_cast<float>(b.xmin / W);
    out[1] = static_cast<float>(b.ymin / H);
    out[2] = static_cast<float>(b.xmax / W);
    out[3] = static_cast<float>(b.ymax / H);
  }
}

PtzAction to_action(const HeadActions& a) {
  return {move_from_index(a[0]), move_from_index(a[1]), move_from_index(a[2])};
}

HeadActions to_head_actions(const PtzAction& a) { return {move_index(a.pan), move_index(a.tilt), move_index(a.zoom)}; }

HeadActions greedy_action(const float* logits) {
  HeadActions a{};
  for (int h = 0; h < 3; ++h) {
    const float* z = logits + 3 * h;
    a[h] = static_cast<int>(std::max_element(z, z + 3) - z);
  }
  return a;
}

HeadActions sample_action(const double* logits, Rng& rng) {
  HeadActions a{};
  for (int h = 0; h < 3; ++h) {
    double p[3];
    softmax3(logits + 3 * h, p);
    const double u = rng.uniform();
    a[h] = u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2);
  }
  return a;
}

// ---- controller ----

PolicyController::PolicyController(NetworkSpec spec, const std::vector<double>& params, bool greedy)
    : net_(std::make_shared<const Network>(std::move(spec))), greedy_(greedy) {
  if (!has_policy(net_->spec().heads)) throw std::invalid_argument("network has no policy head");
  if (params.size() != net_->param_count()) throw std::invalid_argument("parameter count does not match the network");
  params_ = std::make_shared<const AlignedVector<float>>(params.begin(), params.end());
}

InputKind PolicyController::input_kind() const {
  return net_->spec().trunk == Trunk::image_cnn ? InputKind::image : InputKind::oracle_box;
}

void PolicyController::reset(std::uint64_t seed) { rng_ = Rng(seed, "policy-controller"); }

PtzAction PolicyController::act(const ControllerInput& in) {
  const NetworkSpec& spec = net_->spec();
  if (in.vis == nullptr) throw std::invalid_argument("policy controller needs oracle visibility");
  policy_input(spec, in.obs, *in.vis, in.width, in.height, input_);
  std::optional<double> ci;
  if (spec.ci_injection) {
    if (!in.ci) throw std::invalid_argument("network expects a contextual input");
    ci = static_cast<double>(*in.ci);
  }
  net_->forward(params_->data(), input_.data(), ci, cache_);
  if (greedy_) return to_action(greedy_action(cache_.outputs.data()));
  double logits[kPolicyLogits];
  std::copy_n(cache_.outputs.begin(), kPolicyLogits, logits);
  return to_action(sample_action(logits, rng_));
}

// ---- PPO ----

void validate(const PpoConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("ppo config: " + m); };
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) fail("gae_lambda must be in [0, 1]");
  if (!(c.clip_eps > 0.0)) fail("clip_eps must be positive");
  if (c.epochs < 1) fail("epochs must be at least 1");
  if (c.envs < 1) fail("envs must be at least 1");
  if (c.minibatch < 1 || c.rollout < 1) fail("rollout and minibatch must be positive");
  if (c.rollout % c.minibatch != 0) fail("minibatch must divide rollout");
  if (c.rollout % c.envs != 0) fail("envs must divide rollout");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.value_coef < 0.0 || c.entropy_coef < 0.0) fail("loss coefficients must be non-negative");
  if (!(c.grad_norm_clip > 0.0)) fail("grad_norm_clip must be positive");
  if (!(c.reward_scale > 0.0)) fail("reward_scale must be positive");
}

void transition_input(const NetworkSpec& spec, const Transition& t, AlignedVector<float>& out) {
  if (spec.trunk == Trunk::image_cnn) {
    if (t.image.size() != static_cast<std::size_t>(input_size(spec)))
      throw std::invalid_argument("transition image does not match the network input");
    out.resize(t.image.size());
    for (std::size_t i = 0; i < t.image.size(); ++i) out[i] = static_cast<float>(t.image[i]) / 255.0f;
  } else {
    out.assign(t.box.begin(), t.box.end());
  }
}

std::vector<double> compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<bool>& dones, double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
  std::vector<double> adv(n, 0.0);
  double next_adv = 0.0;
  double next_value = last_value;
  for (std::size_t i = n; i-- > 0;) {
    const double nonterminal = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * nonterminal - values[i];
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    adv[i] = next_adv;
    next_value = values[i];
  }
  return adv;
}

std::vector<double> gae_rewards(const std::vector<Transition>& steps, const PpoConfig& cfg) {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.reward * cfg.reward_scale + (s.done ? cfg.gamma * s.cutoff_value : 0.0));
  return r;
}

PpoDiagnostics ppo_optimize(const Network& net, std::vector<double>& params, AdamState& opt, const PpoConfig& cfg,
                            const std::vector<Transition>& batch, std::vector<double> adv,
                            const std::vector<double>& returns, Rng& rng) {
  const NetworkSpec& spec = net.spec();
  if (!has_policy(spec.heads) || !has_value(spec.heads)) throw std::invalid_argument("PPO needs policy and value heads");
  const std::size_t n = batch.size();
  if (adv.size() != n || returns.size() != n) throw std::invalid_argument("ppo_optimize: length mismatch");
  if (n == 0 || n % static_cast<std::size_t>(cfg.minibatch) != 0)
    throw std::invalid_argument("ppo_optimize: minibatch must divide the rollout");

  if (cfg.normalize_advantages) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double a : adv) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  const std::size_t B = static_cast<std::size_t>(cfg.minibatch);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AlignedVector<float> pf(params.size());
  AlignedVector<float> grad(params.size());
  std::vector<double> gd(params.size());
  AlignedVector<float> input;
  ForwardCache<float> cache;
  double logits[kPolicyLogits];
  double dlogp[kPolicyLogits];
  double dent[kPolicyLogits];
  float d_out[kPolicyLogits + 1];

  PpoDiagnostics diag;
  long samples = 0;
  long clipped = 0;
  int minibatches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += B) {
      std::copy(params.begin(), params.end(), pf.begin());
      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t j = start; j < start + B; ++j) {
        const std::size_t idx = order[j];
        const Transition& t = batch[idx];
        transition_input(spec, t, input);
        net.forward(pf.data(), input.data(), t.ci, cache);
        std::copy_n(cache.outputs.begin(), kPolicyLogits, logits);
        const double value = cache.outputs[kPolicyLogits];
        const HeadStats st = action_logprob_entropy(logits, t.action.data());
        const double A = adv[idx];
        const double ratio = std::exp(st.logprob - t.logprob);
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double surr1 = ratio * A;
        const double surr2 = clipped_ratio * A;
        const double verr = value - returns[idx];

        diag.policy_loss += -std::min(surr1, surr2);
        diag.value_loss += verr * verr;
        diag.entropy += st.entropy;
        diag.mean_ratio += ratio;
        diag.approx_kl += t.logprob - st.logprob;
        clipped += std::abs(ratio - 1.0) > cfg.clip_eps;
        ++samples;

        logprob_entropy_grad(logits, t.action.data(), dlogp, dent);
        const double coef = surr1 <= surr2 ? -A * ratio : 0.0;
        const double inv_b = 1.0 / static_cast<double>(B);
        for (int k = 0; k < kPolicyLogits; ++k)
          d_out[k] = static_cast<float>((coef * dlogp[k] - cfg.entropy_coef * dent[k]) * inv_b);
        d_out[kPolicyLogits] = static_cast<float>(cfg.value_coef * 2.0 * verr * inv_b);
        net.backward(pf.data(), cache, d_out, grad.data());
      }
      std::copy(grad.begin(), grad.end(), gd.begin());
      diag.grad_norm += clip_grad_norm(gd, cfg.grad_norm_clip);
      ++minibatches;
      adam_step(params, gd, opt, cfg.learning_rate);
    }
  }
  const double s = static_cast<double>(samples);
  diag.policy_loss /= s;
  diag.value_loss /= s;
  diag.entropy /= s;
  diag.mean_ratio /= s;
  diag.approx_kl /= s;
  diag.clip_fraction = static_cast<double>(clipped) / s;
  diag.grad_norm /= static_cast<double>(minibatches);
  return diag;
}

TrainPpoResult train_ppo(const TrainPpoConfig& cfg, const CheckpointFn& checkpoint) {
  validate(cfg.ppo);
  if (cfg.updates < 0) throw std::invalid_argument("updates must be non-negative");
  EnvConfig ecfg = cfg.env;
  ecfg.training_mode = true;
  validate(ecfg);
  const Network net(cfg.net);
  const NetworkSpec& spec = net.spec();
  if (!has_policy(spec.heads) || !has_value(spec.heads)) throw std::invalid_argument("PPO needs policy and value heads");
  if (spec.trunk == Trunk::image_cnn && (spec.input_w != ecfg.obs_size || spec.input_h != ecfg.obs_size))
    throw std::invalid_argument("network input does not match the observation size");

  TrainPpoResult res;
  res.params = net.init_params(derive_seed(cfg.seed, "ppo-init"));
  AdamState opt(res.params.size());
  Rng act_rng(cfg.seed, "ppo-actions");
  Rng mb_rng(cfg.seed, "ppo-minibatch");

  const int K = cfg.ppo.envs;
  const int T = cfg.ppo.rollout / K;
  std::vector<Environment> envs;
  std::vector<Observation> obs(static_cast<std::size_t>(K));
  std::vector<std::uint64_t> episode_count(static_cast<std::size_t>(K), 0);
  std::vector<double> running(static_cast<std::size_t>(K), 0.0);
  envs.reserve(static_cast<std::size_t>(K));
  auto reset_env = [&](int k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::uint64_t s = derive_seed(cfg.seed, "ppo-episode", (static_cast<std::uint64_t>(k) << 32) | episode_count[ku]++);
    obs[ku] = envs[ku].reset(s);
    running[ku] = 0.0;
  };
  for (int k = 0; k < K; ++k) {
    envs.emplace_back(ecfg);
    envs.back().set_render(spec.trunk == Trunk::image_cnn);
    reset_env(k);
  }
  const double W = envs[0].oracle_rig().width;
  const double H = envs[0].oracle_rig().height;

  AlignedVector<float> pf;
  AlignedVector<float> input;
  ForwardCache<float> cache;
  double logits[kPolicyLogits];
  long env_steps = 0;

  auto env_ci = [&](const Environment& env) -> std::optional<double> {
    if (!spec.ci_injection) return std::nullopt;
    if (!env.ci()) throw std::invalid_argument("network expects a contextual input but the scenario has none");
    return static_cast<double>(*env.ci());
  };

  for (int u = 0; u < cfg.updates; ++u) {
    pf.assign(res.params.begin(), res.params.end());
    std::vector<std::vector<Transition>> per_env(static_cast<std::size_t>(K));
    for (auto& v : per_env) v.reserve(static_cast<std::size_t>(T));
    UpdateStats stats;
    stats.update = u + 1;
    double return_sum = 0.0;

    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        Environment& env = envs[ku];
        Transition tr;
        tr.ci = env_ci(env);
        policy_input(spec, &obs[ku], env.visibility(), W, H, input);
        if (spec.trunk == Trunk::image_cnn) {
          tr.image = obs[ku].bytes;
        } else {
          std::copy_n(input.begin(), 4, tr.box.begin());
        }
        net.forward(pf.data(), input.data(), tr.ci, cache);
        std::copy_n(cache.outputs.begin(), kPolicyLogits, logits);
        tr.value = cache.outputs[kPolicyLogits];
        tr.action = sample_action(logits, act_rng);
        tr.logprob = action_logprob_entropy(logits, tr.action.data()).logprob;
        StepResult r = env.step(to_action(tr.action));
        tr.reward = r.reward;
        tr.done = r.done;
        running[ku] += r.reward;
        ++env_steps;
        per_env[ku].push_back(std::move(tr));
        if (r.done) {
          policy_input(spec, &r.obs, env.visibility(), W, H, input);
          net.forward(pf.data(), input.data(), env_ci(env), cache);
          per_env[ku].back().cutoff_value = cache.outputs[kPolicyLogits];
          res.episode_returns.push_back(running[ku]);
          return_sum += running[ku];
          ++stats.episodes;
          reset_env(k);
        } else {
          obs[ku] = std::move(r.obs);
        }
      }
    }

    std::vector<Transition> batch;
    std::vector<double> adv;
    std::vector<double> returns;
    batch.reserve(static_cast<std::size_t>(cfg.ppo.rollout));
    for (int k = 0; k < K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      auto& steps = per_env[ku];
      double last_value = 0.0;
      if (!steps.back().done) {
        const std::optional<double> ci = env_ci(envs[ku]);
        policy_input(spec, &obs[ku], envs[ku].visibility(), W, H, input);
        net.forward(pf.data(), input.data(), ci, cache);
        last_value = cache.outputs[kPolicyLogits];
      }
      const std::vector<double> rewards = gae_rewards(steps, cfg.ppo);
      std::vector<double> values;
      std::vector<bool> dones;
      for (const auto& s : steps) {
        values.push_back(s.value);
        dones.push_back(s.done);
      }
      const std::vector<double> a = compute_gae(rewards, values, dones, last_value, cfg.ppo.gamma, cfg.ppo.gae_lambda);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        adv.push_back(a[i]);
        returns.push_back(a[i] + values[i]);
        batch.push_back(std::move(steps[i]));
      }
    }

    stats.diag = ppo_optimize(net, res.params, opt, cfg.ppo, batch, std::move(adv), returns, mb_rng);
    stats.env_steps = env_steps;
    stats.mean_return = stats.episodes > 0 ? return_sum / stats.episodes : 0.0;
    res.curve.push_back(stats);
    if (checkpoint) checkpoint(u + 1, res.params);
  }
  return res;
}

std::string learning_curve_csv(const std::vector<UpdateStats>& curve) {
  std::ostringstream os;
  os << "update,env_steps,episodes,mean_return,policy_loss,value_loss,entropy,mean_ratio,clip_fraction,approx_kl,"
        "grad_norm\n";
  for (const auto& s : curve) {
    os << s.update << ',' << s.env_steps << ',' << s.episodes << ','
       << (s.episodes > 0 ? format_double(s.mean_return) : std::string()) << ',' << format_double(s.diag.policy_loss)
       << ',' << format_double(s.diag.value_loss) << ',' << format_double(s.diag.entropy) << ','
       << format_double(s.diag.mean_ratio) << ',' << format_double(s.diag.clip_fraction) << ','
       << format_double(s.diag.approx_kl) << ',' << format_double(s.diag.grad_norm) << '\n';
  }
  return os.str();
}

DecileMeans decile_means(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("decile_means of an empty sequence");
  const std::size_t m = std::max<std::size_t>(1, xs.size() / 10);
  DecileMeans d;
  d.first = std::accumulate(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(m), 0.0) / static_cast<double>(m);
  d.last = std::accumulate(xs.end() - static_cast<std::ptrdiff_t>(m), xs.end(), 0.0) / static_cast<double>(m);
  return d;
}

}  // namespace ptz
