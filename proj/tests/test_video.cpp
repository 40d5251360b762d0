#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ptz/controllers.hpp"
#include "ptz/video_ptz.hpp"

using namespace ptz;
namespace fs = std::filesystem;

namespace {

VideoPtzConfig wide() {
  VideoPtzConfig c;
  c.frame_w = 1800;
  c.frame_h = 1000;
  return c;
}

fs::path make_sequence(const std::string& name, int frames, int w, int h) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (int k = 0; k < frames; ++k) {
    Frame f(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f.at(x, y) = static_cast<float>((x * 7 + y * 3 + k * 11) % 256) / 255.0f;
    char file[32];
    std::snprintf(file, sizeof file, "frame_%06d.pgm", k + 1);
    write_pgm(dir / file, f);
  }
  return dir;
}

}  // namespace

TEST_CASE("crop action examples") {
  const VideoPtzConfig c = wide();
  const CropWindow w{900, 500, 400, 400};
  CHECK(apply_action_to_crop(w, {Move::plus, Move::none, Move::none}, c).cx == 940);
  CHECK(apply_action_to_crop(w, {Move::none, Move::none, Move::minus}, c).w == 380);
  CHECK(apply_action_to_crop(w, {Move::none, Move::minus, Move::none}, c).cy > 500);
  const CropWindow left{200, 500, 400, 400};
  CHECK(apply_action_to_crop(left, {Move::minus, Move::none, Move::none}, c).cx == 200);
  CHECK(apply_action_to_crop(w, kNoop, c) == w);
}

TEST_CASE("crop stays valid under any action sequence") {
  const VideoPtzConfig c = wide();
  Rng rng(5);
  CropWindow w{900, 500, 400, 400};
  for (int i = 0; i < 20000; ++i) {
    w = apply_action_to_crop(w, PtzAction::from_index(static_cast<int>(rng.below(27))), c);
    REQUIRE(w.w == w.h);
    REQUIRE(w.w >= c.min_size);
    REQUIRE(w.cx - w.w / 2 >= 0);
    REQUIRE(w.cx + w.w / 2 <= c.frame_w);
    REQUIRE(w.cy - w.h / 2 >= 0);
    REQUIRE(w.cy + w.h / 2 <= c.frame_h);
  }
}

TEST_CASE("pan then inverse pan restores the crop") {
  const VideoPtzConfig c = wide();
  const CropWindow w{900, 500, 300, 300};
  for (Move m : {Move::minus, Move::plus}) {
    const Move inv = m == Move::plus ? Move::minus : Move::plus;
    const CropWindow back = apply_action_to_crop(apply_action_to_crop(w, {m, m, Move::none}, c), {inv, inv, Move::none}, c);
    CHECK(back.cx == doctest::Approx(w.cx).epsilon(1e-12));
    CHECK(back.cy == doctest::Approx(w.cy).epsilon(1e-12));
    CHECK(back.w == w.w);
  }
}

TEST_CASE("observation extraction") {
  Frame flat(300, 200, 0.4f);
  VideoPtzConfig c;
  c.frame_w = 300;
  c.frame_h = 200;
  const Observation o = extract_observation(flat, {150, 100, 200, 200}, c);
  for (float p : o.image.pixels) CHECK(p == o.image.pixels[0]);

  Frame ramp(300, 200);
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 300; ++x) ramp.at(x, y) = static_cast<float>((x + 2 * y) % 256) / 255.0f;
  const Frame same = crop_resize(ramp, {100, 110, 120, 120}, 120);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 120; ++x) REQUIRE(same.at(x, y) == ramp.at(40 + x, 50 + y));
}

TEST_CASE("video episodes") {
  const fs::path dir = make_sequence("ptzsim_test_video", 6, 160, 120);
  VideoPtzConfig c;
  c.obs_size = 40;
  ZeroController z;
  const CropWindow init{80, 60, 80, 80};
  const auto r = run_video_episode(dir, init, z, c, dir / "out");
  REQUIRE(r.records.size() == 6);
  for (const auto& rec : r.records) CHECK(rec.crop == init);
  CHECK(fs::exists(dir / "out" / "obs_000005.pgm"));

  RandomController rc;
  const auto a = run_video_episode(dir, init, rc, c);
  const auto b = run_video_episode(dir, init, rc, c);
  CHECK(crop_trace_csv(a) == crop_trace_csv(b));

  PerfectBBKalmanController k;
  CHECK_THROWS_AS(run_video_episode(dir, init, k, c), std::invalid_argument);
  CHECK_THROWS_AS(run_video_episode(dir, {10, 10, 80, 80}, z, c), std::invalid_argument);
  CHECK_THROWS_AS(list_frames(dir / "out"), IoError);
  fs::remove_all(dir);
}
