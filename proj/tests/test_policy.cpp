#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ptz/policy.hpp"

using namespace ptz;

namespace {

// Advantages by the direct sum A_t = sum_l (gamma*lambda)^l delta_{t+l}, truncated at episode ends.
std::vector<double> gae_direct(const std::vector<double>& r, const std::vector<double>& v, const std::vector<bool>& d,
                               double last, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : last;
    delta[t] = r[t] + (d[t] ? 0.0 : g * next) - v[t];
  }
  std::vector<double> a(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      a[t] += w * delta[k];
      if (d[k]) break;
      w *= g * l;
    }
  }
  return a;
}

NetworkSpec small_bbox() {
  NetworkSpec s = NetworkSpec::bbox(HeadSet::policy_value);
  s.fc = {8, 8};
  return s;
}

// Rollout on a one-step bandit: constant input, reward 1 when pan is "plus".
std::vector<Transition> bandit_rollout(const Network& net, const std::vector<double>& params, int n, Rng& rng) {
  const std::vector<float> pf(params.begin(), params.end());
  const std::array<float, 4> box{0.4f, 0.4f, 0.6f, 0.6f};
  ForwardCache<float> c;
  net.forward(pf.data(), box.data(), std::nullopt, c);
  double logits[kPolicyLogits];
  std::copy_n(c.outputs.begin(), kPolicyLogits, logits);
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.box = box;
    t.action = sample_action(logits, rng);
    t.logprob = action_logprob_entropy(logits, t.action.data()).logprob;
    t.value = c.outputs[kPolicyLogits];
    t.reward = t.action[0] == 2 ? 1.0 : 0.0;
    t.done = true;
    out.push_back(t);
  }
  return out;
}

double pan_plus_prob(const Network& net, const std::vector<double>& params) {
  const std::array<float, 4> box{0.4f, 0.4f, 0.6f, 0.6f};
  const std::vector<float> pf(params.begin(), params.end());
  ForwardCache<float> c;
  net.forward(pf.data(), box.data(), std::nullopt, c);
  double logits[3] = {c.outputs[0], c.outputs[1], c.outputs[2]};
  double p[3];
  softmax3(logits, p);
  return p[2];
}

}  // namespace

TEST_CASE("gae") {
  // lambda 0, gamma 1: one-step TD error.
  const std::vector<double> r{1.0, 0.5, -1.0, 2.0};
  const std::vector<double> v{0.3, 0.2, 0.1, 0.4};
  const std::vector<bool> nd(4, false);
  const auto a = compute_gae(r, v, nd, 0.7, 1.0, 0.0);
  CHECK(a[0] == doctest::Approx(1.0 + 0.2 - 0.3));
  CHECK(a[2] == doctest::Approx(-1.0 + 0.4 - 0.1));
  CHECK(a[3] == doctest::Approx(2.0 + 0.7 - 0.4));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 30;
    std::vector<double> rr(n), vv(n);
    std::vector<bool> dd(n);
    for (int i = 0; i < n; ++i) {
      rr[i] = rng.uniform(-1, 1);
      vv[i] = rng.uniform(-1, 1);
      dd[i] = rng.bernoulli(0.15);
    }
    const double last = rng.uniform(-1, 1);
    const auto fast = compute_gae(rr, vv, dd, last, 0.99, 0.95);
    const auto slow = gae_direct(rr, vv, dd, last, 0.99, 0.95);
    for (int i = 0; i < n; ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(compute_gae({1.0}, {}, {false}, 0.0, 0.9, 0.9), std::invalid_argument);
}

TEST_CASE("cut-off episodes bootstrap from the critic") {
  PpoConfig cfg;
  cfg.reward_scale = 0.5;
  cfg.gamma = 0.9;
  std::vector<Transition> steps(3);
  steps[0].reward = -10.0;
  steps[1].reward = 2.0;
  steps[1].done = true;
  steps[1].cutoff_value = -4.0;
  steps[2].reward = 1.0;
  steps[2].cutoff_value = 7.0;  // ignored while not done
  const auto r = gae_rewards(steps, cfg);
  CHECK(r[0] == -5.0);
  CHECK(r[1] == doctest::Approx(1.0 + 0.9 * -4.0));
  CHECK(r[2] == 0.5);

  // With lambda 1 the cut-off step's return is its reward plus the discounted critic value,
  // as if the episode continued.
  const std::vector<double> v{0.0, 0.0, 0.0};
  const auto a = compute_gae(r, v, {false, true, false}, 0.0, cfg.gamma, 1.0);
  CHECK(a[1] + v[1] == doctest::Approx(1.0 - 3.6));
}

TEST_CASE("ppo config validation") {
  PpoConfig c;
  validate(c);
  c.minibatch = 300;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = PpoConfig{};
  c.gamma = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = PpoConfig{};
  c.envs = 3;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("zero advantages with no value or entropy terms leave parameters unchanged") {
  const Network net(small_bbox());
  std::vector<double> params = net.init_params(1);
  const std::vector<double> before = params;
  Rng rng(1);
  const auto batch = bandit_rollout(net, params, 64, rng);
  PpoConfig cfg;
  cfg.minibatch = 16;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  AdamState opt(params.size());
  Rng mb(2);
  ppo_optimize(net, params, opt, cfg, batch, std::vector<double>(64, 0.0), std::vector<double>(64, 5.0), mb);
  CHECK(params == before);
}

TEST_CASE("first pass sees unit ratios") {
  const Network net(small_bbox());
  std::vector<double> params = net.init_params(4);
  Rng rng(4);
  const auto batch = bandit_rollout(net, params, 32, rng);
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 32;
  AdamState opt(params.size());
  std::vector<double> adv;
  for (const auto& t : batch) adv.push_back(t.reward - 0.3);
  const std::vector<double> ret(32, 1.0);
  const PpoDiagnostics d = ppo_optimize(net, params, opt, cfg, batch, adv, ret, rng);
  CHECK(d.mean_ratio == 1.0);
  CHECK(d.clip_fraction == 0.0);
  CHECK(d.approx_kl == 0.0);
}

TEST_CASE("ppo improves a rewarded action on a bandit") {
  const Network net(small_bbox());
  std::vector<double> params = net.init_params(7);
  const double p0 = pan_plus_prob(net, params);
  PpoConfig cfg;
  cfg.minibatch = 64;
  AdamState opt(params.size());
  Rng rng(7);
  for (int u = 0; u < 20; ++u) {
    const auto batch = bandit_rollout(net, params, 256, rng);
    std::vector<double> r, v;
    std::vector<bool> d;
    for (const auto& t : batch) {
      r.push_back(t.reward);
      v.push_back(t.value);
      d.push_back(t.done);
    }
    const auto adv = compute_gae(r, v, d, 0.0, cfg.gamma, cfg.gae_lambda);
    std::vector<double> ret(adv.size());
    for (std::size_t i = 0; i < adv.size(); ++i) ret[i] = adv[i] + v[i];
    ppo_optimize(net, params, opt, cfg, batch, adv, ret, rng);
  }
  const double p1 = pan_plus_prob(net, params);
  CHECK(p1 > p0);
  CHECK(p1 > 0.5);
}

TEST_CASE("action encoding") {
  for (int i = 0; i < 27; ++i) {
    const PtzAction a = PtzAction::from_index(i);
    CHECK(to_action(to_head_actions(a)) == a);
  }
  CHECK(to_action({1, 1, 1}) == kNoop);
  const float logits[9] = {0, 1, 0, 3, 2, 1, -1, -2, 5};
  CHECK(greedy_action(logits) == HeadActions{1, 0, 2});
  Rng rng(1);
  const double sure[9] = {50, 0, 0, 0, 50, 0, 0, 0, 50};
  for (int i = 0; i < 20; ++i) CHECK(sample_action(sure, rng) == HeadActions{0, 1, 2});
}

TEST_CASE("bbox policy input") {
  const NetworkSpec s = NetworkSpec::bbox(HeadSet::policy_value);
  Visibility v;
  AlignedVector<float> x;
  policy_input(s, nullptr, v, 120, 120, x);
  CHECK(x == AlignedVector<float>{0, 0, 0, 0});
  v.visible = true;
  v.clipped_box = {12, 24, 60, 120};
  policy_input(s, nullptr, v, 120, 120, x);
  CHECK(x == AlignedVector<float>{0.1f, 0.2f, 0.5f, 1.0f});
  CHECK_THROWS_AS(policy_input(NetworkSpec::image(HeadSet::policy), nullptr, v, 120, 120, x), std::invalid_argument);
}

TEST_CASE("decile means") {
  std::vector<double> xs;
  for (int i = 1; i <= 20; ++i) xs.push_back(i);
  const auto d = decile_means(xs);
  CHECK(d.first == 1.5);
  CHECK(d.last == 19.5);
  CHECK(decile_means({4.0}).first == 4.0);
  CHECK_THROWS_AS(decile_means({}), std::invalid_argument);
}

TEST_CASE("train_ppo is deterministic") {
  TrainPpoConfig c;
  c.env.scenario = scenario(ScenarioId::sc0_static);
  c.net = small_bbox();
  c.ppo.rollout = 512;
  c.ppo.minibatch = 128;
  c.updates = 2;
  c.seed = 5;
  int checkpoints = 0;
  const auto a = train_ppo(c, [&](int, const std::vector<double>&) { ++checkpoints; });
  const auto b = train_ppo(c);
  CHECK(checkpoints == 2);
  CHECK(a.params == b.params);
  CHECK(learning_curve_csv(a.curve) == learning_curve_csv(b.curve));
  CHECK(a.curve.back().env_steps == 1024);
  c.seed = 6;
  CHECK(train_ppo(c).params != a.params);
}

TEST_CASE("policy controller") {
  const NetworkSpec s = small_bbox();
  const Network net(s);
  PolicyController pc(s, net.init_params(2));
  CHECK(pc.input_kind() == InputKind::oracle_box);
  EnvConfig cfg;
  cfg.scenario = scenario(ScenarioId::sc1);
  cfg.episode_len = 50;
  const auto r1 = run_episode(pc, cfg, 3);
  const auto r2 = run_episode(pc, cfg, 3);
  CHECK(r1.trace.records == r2.trace.records);
  CHECK_THROWS_AS(PolicyController(s, std::vector<double>(3, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(PolicyController(NetworkSpec::bbox(HeadSet::relloc), std::vector<double>(10, 0.0)),
                  std::invalid_argument);
}
