#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "ptz/frame.hpp"
#include "ptz/supervised.hpp"

using namespace ptz;

namespace {

GenDatasetConfig small_config(SupervisedTask task, int samples) {
  GenDatasetConfig g;
  g.env.scenario = scenario(ScenarioId::sc1);
  g.env.obs_size = 16;
  g.env.render_size = 32;
  g.task = task;
  g.samples = samples;
  g.seed = 3;
  return g;
}

NetworkSpec small_net(SupervisedTask task) {
  NetworkSpec s = NetworkSpec::image(head_for(task));
  s.input_w = 16;
  s.input_h = 16;
  s.convs = {{3, 4, 2}, {3, 4, 2}};
  s.fc = {16};
  return s;
}

}  // namespace

TEST_CASE("targets") {
  const auto r = supervised_target(SupervisedTask::relloc, {30, 30, 90, 90}, 120, 120);
  CHECK(r == std::vector<float>{0.0f, 0.0f, 0.25f});
  const auto d = supervised_target(SupervisedTask::detector, {12, 24, 60, 120}, 120, 120);
  CHECK(d == std::vector<float>{0.1f, 0.2f, 0.5f, 1.0f});
  CHECK(parse_task("detector") == SupervisedTask::detector);
  CHECK_THROWS_AS(parse_task("x"), std::invalid_argument);
}

TEST_CASE("split is about 80/20 and fixed") {
  int val = 0;
  for (std::size_t i = 0; i < 10000; ++i) val += is_validation(i);
  CHECK(val > 1800);
  CHECK(val < 2200);
  CHECK(is_validation(17) == is_validation(17));
}

TEST_CASE("dataset generation and files") {
  const Dataset ds = generate_dataset(small_config(SupervisedTask::detector, 100));
  REQUIRE(ds.size() == 100);
  CHECK(ds.targets.size() == 400);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* t = ds.target(i);
    CHECK(t[0] >= 0.0f);
    CHECK(t[2] <= 1.0f);
    CHECK(t[0] < t[2]);
    CHECK(t[1] < t[3]);
  }
  const Dataset again = generate_dataset(small_config(SupervisedTask::detector, 100));
  CHECK(again.images == ds.images);
  CHECK(again.targets == ds.targets);

  const auto dir = std::filesystem::temp_directory_path() / "ptzsim_test_supervised";
  std::filesystem::create_directories(dir);
  save_dataset(dir / "d.bin", ds);
  const Dataset back = load_dataset(dir / "d.bin");
  CHECK(back.task == ds.task);
  CHECK(back.images == ds.images);
  CHECK(back.targets == ds.targets);
  std::filesystem::resize_file(dir / "d.bin", 1000);
  CHECK_THROWS_AS(load_dataset(dir / "d.bin"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mse is zero when predictions equal targets") {
  Dataset ds = generate_dataset(small_config(SupervisedTask::relloc, 20));
  const Network net(small_net(SupervisedTask::relloc));
  const auto params = net.init_params(1);
  const std::vector<float> pf(params.begin(), params.end());
  ForwardCache<float> c;
  std::vector<float> x(256);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < 256; ++k) x[k] = ds.image(i)[k] / 255.0f;
    net.forward(pf.data(), x.data(), std::nullopt, c);
    std::copy(c.outputs.begin(), c.outputs.end(), ds.targets.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  CHECK(mse(net, params, ds, false) == 0.0);
  CHECK(mse(net, params, ds, true) == 0.0);
}

TEST_CASE("mean predictor") {
  Dataset ds;
  ds.task = SupervisedTask::relloc;
  ds.obs_size = 1;
  for (std::size_t i = 0; i < 50; ++i) {
    ds.images.push_back(0);
    const float v = static_cast<float>(i % 7);
    ds.targets.insert(ds.targets.end(), {v, v, v});
  }
  double mean = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < 50; ++i)
    if (!is_validation(i)) {
      mean += static_cast<double>(i % 7);
      ++n;
    }
  mean /= n;
  double sum = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < 50; ++i)
    if (is_validation(i)) {
      sum += (static_cast<double>(i % 7) - mean) * (static_cast<double>(i % 7) - mean);
      ++m;
    }
  CHECK(mean_predictor_loss(ds) == doctest::Approx(sum / m));
}

TEST_CASE("supervised training is deterministic and reduces loss") {
  const Dataset ds = generate_dataset(small_config(SupervisedTask::relloc, 200));
  SupervisedConfig cfg;
  cfg.epochs = 6;
  cfg.seed = 4;
  const auto a = supervised_train(small_net(SupervisedTask::relloc), ds, cfg);
  const auto b = supervised_train(small_net(SupervisedTask::relloc), ds, cfg);
  CHECK(supervised_curve_csv(a) == supervised_curve_csv(b));
  CHECK(a.params == b.params);
  REQUIRE(a.curve.size() == 6);
  CHECK(a.curve.back().train_loss < a.curve.front().train_loss);

  CHECK_THROWS_AS(supervised_train(small_net(SupervisedTask::relloc), Dataset{}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(supervised_train(small_net(SupervisedTask::detector), ds, cfg), std::invalid_argument);
}

TEST_CASE("regression controller") {
  const NetworkSpec s = small_net(SupervisedTask::relloc);
  RegressionNetController c(s, std::vector<double>(Network(s).param_count(), 0.0));
  // Zero network: centered, zero area -> zoom in.
  Observation obs;
  obs.image = Frame(16, 16, 0.5f);
  ControllerInput in;
  in.obs = &obs;
  in.width = 16;
  in.height = 16;
  CHECK(c.act(in) == PtzAction{Move::none, Move::none, Move::minus});
  CHECK_THROWS_AS(RegressionNetController(NetworkSpec::bbox(HeadSet::relloc), std::vector<double>(1)),
                  std::invalid_argument);
}
