#pragma once

#include <vector>

#include "ptz/camera.hpp"
#include "ptz/frame.hpp"
#include "ptz/rng.hpp"
#include "ptz/scene.hpp"

namespace ptz {

inline constexpr double kWallHeight = 10.0;
inline constexpr double kTrunkIntensity = 0.25;
inline constexpr double kCanopyIntensity = 0.38;

struct FaceShading {
  double top = 1.0;
  double side_x = 0.85;  // faces normal to the object's width axis
  double side_y = 0.70;  // faces normal to the object's length axis
  double bottom = 0.55;
};

struct RenderConfig {
  int background_id = 0;
  bool walls_visible = false;
  double sky_intensity = 0.78;
  FaceShading shading;
};

struct AugmentationConfig {
  double salt_pepper_prob = 0.0;
  double brightness_delta = 0.0;
  double contrast_scale = 1.0;
  bool shadow_enabled = false;
};

double color_intensity(Color c);
double ground_intensity(int background_id, double x, double y);
double wall_intensity(int background_id, double along, double z);

RenderConfig render_config(const WorldState& world);

/// Ray-casts the world. When `hit_ids` is given it receives, per pixel, the id of the
/// object hit first (-1 for ground, walls and sky).
Frame render(const WorldState& world, const CameraRig& rig, const PtzState& ptz, const RenderConfig& cfg,
             std::vector<int>* hit_ids = nullptr);

/// Draws the per-step augmentation parameters used by scenarios with augmentation enabled.
AugmentationConfig sample_augmentation(Rng& rng);

Frame apply_augmentations(Frame frame, const AugmentationConfig& cfg, Rng& rng);

/// Box-filter downsample; the input size must be an integer multiple of the output size.
Frame downsample(const Frame& frame, int out_w, int out_h);

}  // namespace ptz
