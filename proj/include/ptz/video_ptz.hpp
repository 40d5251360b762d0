#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ptz/environment.hpp"
#include "ptz/frame.hpp"

namespace ptz {

/// Square crop of a recorded frame acting as a virtual PTZ view.
struct CropWindow {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

struct VideoPtzConfig {
  double fov_full = 90.0;  // degrees spanned by the full frame width
  int frame_w = 0;
  int frame_h = 0;
  int obs_size = 120;
  double min_size = 16.0;
};

/// Throws std::invalid_argument.
void validate(const VideoPtzConfig& cfg);

/// Forces the crop square, within [min_size, min(frame_w, frame_h)], and inside the frame.
CropWindow clamp_crop(const CropWindow& crop, const VideoPtzConfig& cfg);

/// Pan and tilt move the center by frame_w * delta / fov_full (tilt down moves it down);
/// zoom grows or shrinks the side by frame_w * fov_delta / fov_full about the center.
CropWindow apply_action_to_crop(const CropWindow& crop, const PtzAction& action, const VideoPtzConfig& cfg);

/// Bilinear resample of the crop to out x out.
Frame crop_resize(const Frame& frame, const CropWindow& crop, int out);

/// Crop, resize to obs_size and quantize like simulator observations.
Observation extract_observation(const Frame& frame, const CropWindow& crop, const VideoPtzConfig& cfg);

/// frame_NNNNNN.pgm / .ppm files in index order. Throws IoError when none exist.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

struct CropRecord {
  int frame = 0;
  CropWindow crop;  // crop used for this frame
  PtzAction action;
};

struct VideoRunResult {
  VideoPtzConfig cfg;
  std::vector<CropRecord> records;
};

/// Drives `controller` over the sequence. The frame size is taken from the first frame;
/// observations are written as PGM to `frames_out` when given.
VideoRunResult run_video_episode(const std::filesystem::path& frames_dir, const CropWindow& init_crop,
                                 Controller& controller, VideoPtzConfig cfg,
                                 const std::optional<std::filesystem::path>& frames_out = std::nullopt);

std::string crop_trace_csv(const VideoRunResult& r);

}  // namespace ptz
