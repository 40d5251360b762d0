#include "ptz/video_ptz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ptz/io_util.hpp"

namespace ptz {

void validate(const VideoPtzConfig& cfg) {
  if (!(cfg.fov_full > 0.0 && cfg.fov_full < 180.0)) throw std::invalid_argument("fov_full must be in (0, 180)");
  if (cfg.frame_w <= 0 || cfg.frame_h <= 0) throw std::invalid_argument("frame size must be positive");
  if (cfg.obs_size <= 0) throw std::invalid_argument("obs_size must be positive");
  if (!(cfg.min_size > 0.0) || cfg.min_size > std::min(cfg.frame_w, cfg.frame_h))
    throw std::invalid_argument("min_size must be positive and fit in the frame");
}

CropWindow clamp_crop(const CropWindow& crop, const VideoPtzConfig& cfg) {
  const double max_side = std::min(cfg.frame_w, cfg.frame_h);
  CropWindow c;
  c.w = std::clamp(crop.w, cfg.min_size, max_side);
  c.h = c.w;
  c.cx = std::clamp(crop.cx, c.w / 2.0, cfg.frame_w - c.w / 2.0);
  c.cy = std::clamp(crop.cy, c.h / 2.0, cfg.frame_h - c.h / 2.0);
  return c;
}

CropWindow apply_action_to_crop(const CropWindow& crop, const PtzAction& action, const VideoPtzConfig& cfg) {
  if (action == kNoop) return crop;
  CropWindow c = crop;
  c.cx += cfg.frame_w * action.pan_delta() / cfg.fov_full;
  c.cy -= cfg.frame_h * action.tilt_delta() / cfg.fov_full;
  c.w += cfg.frame_w * action.fov_delta() / cfg.fov_full;
  c.h = c.w;
  return clamp_crop(c, cfg);
}

Frame crop_resize(const Frame& frame, const CropWindow& crop, int out) {
  if (out <= 0) throw std::invalid_argument("output size must be positive");
  Frame f(out, out);
  const double x0 = crop.cx - crop.w / 2.0;
  const double y0 = crop.cy - crop.h / 2.0;
  const double sx = crop.w / out;
  const double sy = crop.h / out;
  auto sample = [&](double x, double y) {
    x = std::clamp(x, 0.0, frame.width - 1.0);
    y = std::clamp(y, 0.0, frame.height - 1.0);
    const int ix = std::min(static_cast<int>(x), frame.width - 1);
    const int iy = std::min(static_cast<int>(y), frame.height - 1);
    const double fx = x - ix;
    const double fy = y - iy;
    const int ix1 = std::min(ix + 1, frame.width - 1);
    const int iy1 = std::min(iy + 1, frame.height - 1);
    const double top = frame.at(ix, iy) * (1 - fx) + frame.at(ix1, iy) * fx;
    const double bottom = frame.at(ix, iy1) * (1 - fx) + frame.at(ix1, iy1) * fx;
    return top * (1 - fy) + bottom * fy;
  };
  for (int j = 0; j < out; ++j) {
    const double y = y0 + (j + 0.5) * sy - 0.5;
    for (int i = 0; i < out; ++i) {
      const double x = x0 + (i + 0.5) * sx - 0.5;
      f.at(i, j) = static_cast<float>(sample(x, y));
    }
  }
  return f;
}

Observation extract_observation(const Frame& frame, const CropWindow& crop, const VideoPtzConfig& cfg) {
  Observation obs;
  obs.bytes = to_bytes(crop_resize(frame, crop, cfg.obs_size));
  obs.image = from_bytes(cfg.obs_size, cfg.obs_size, obs.bytes);
  return obs;
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::map<long, std::filesystem::path> found;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    long idx = 0;
    char ext[4] = {};
    int consumed = 0;
    if (std::sscanf(name.c_str(), "frame_%6ld.%3s%n", &idx, ext, &consumed) == 2 &&
        consumed == static_cast<int>(name.size()) && name.size() == 16 &&
        (std::string(ext) == "pgm" || std::string(ext) == "ppm")) {
      if (found.count(idx)) throw IoError("duplicate frame index " + std::to_string(idx));
      found[idx] = e.path();
    }
  }
  if (found.empty()) throw IoError("no frame_NNNNNN.pgm/ppm files in " + dir.string());
  std::vector<std::filesystem::path> out;
  for (auto& [i, p] : found) out.push_back(p);
  return out;
}

VideoRunResult run_video_episode(const std::filesystem::path& frames_dir, const CropWindow& init_crop,
                                 Controller& controller, VideoPtzConfig cfg,
                                 const std::optional<std::filesystem::path>& frames_out) {
  if (controller.input_kind() == InputKind::oracle_box)
    throw std::invalid_argument("controllers that need oracle boxes cannot run on recorded video");
  const auto paths = list_frames(frames_dir);
  Frame frame = read_pnm(paths.front());
  cfg.frame_w = frame.width;
  cfg.frame_h = frame.height;
  validate(cfg);
  const double max_side = std::min(cfg.frame_w, cfg.frame_h);
  if (init_crop.w < cfg.min_size || init_crop.w > max_side || init_crop.w != init_crop.h ||
      init_crop.cx - init_crop.w / 2 < 0 || init_crop.cx + init_crop.w / 2 > cfg.frame_w ||
      init_crop.cy - init_crop.h / 2 < 0 || init_crop.cy + init_crop.h / 2 > cfg.frame_h)
    throw std::invalid_argument("initial crop must be square and inside the first frame");
  if (frames_out) std::filesystem::create_directories(*frames_out);

  VideoRunResult res;
  res.cfg = cfg;
  controller.reset(0);
  CropWindow crop = init_crop;
  const Visibility no_truth;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    if (k > 0) {
      frame = read_pnm(paths[k]);
      if (frame.width != cfg.frame_w || frame.height != cfg.frame_h)
        throw FormatError("frame size changes within the sequence at " + paths[k].string());
    }
    const Observation obs = extract_observation(frame, crop, cfg);
    if (frames_out) {
      char name[32];
      std::snprintf(name, sizeof name, "obs_%06zu.pgm", k);
      write_pgm(*frames_out / name, obs.image);
    }
    ControllerInput in;
    in.obs = &obs;
    in.vis = &no_truth;
    in.width = cfg.obs_size;
    in.height = cfg.obs_size;
    const PtzAction a = controller.act(in);
    res.records.push_back({static_cast<int>(k), crop, a});
    crop = apply_action_to_crop(crop, a, cfg);
  }
  return res;
}

std::string crop_trace_csv(const VideoRunResult& r) {
  std::ostringstream os;
  os << "frame_index,cx,cy,w,h,pan,tilt,zoom\n";
  for (const auto& rec : r.records) {
    os << rec.frame << ',' << format_double(rec.crop.cx) << ',' << format_double(rec.crop.cy) << ','
       << format_double(rec.crop.w) << ',' << format_double(rec.crop.h) << ',' << static_cast<int>(rec.action.pan)
       << ',' << static_cast<int>(rec.action.tilt) << ',' << static_cast<int>(rec.action.zoom) << '\n';
  }
  return os.str();
}

}  // namespace ptz
