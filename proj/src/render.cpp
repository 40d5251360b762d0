#include "ptz/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ptz {
namespace {

constexpr double kHitEps = 1e-9;

struct Primitive {
  int object_id = -1;
  double intensity = 0.0;
  Vec3 center;  // box center
  Vec2 along;   // length axis (local y)
  Vec2 side;    // width axis (local x)
  double hl = 0, hw = 0, hh = 0;
  // Screen rectangle of candidate pixels, inclusive.
  int px0 = 0, py0 = 0, px1 = -1, py1 = -1;
};

struct Hit {
  double t = INFINITY;
  double value = 0.0;
  int object_id = -1;
};

Primitive make_primitive(int id, double intensity, Vec2 pos, double heading, const Dims& d, double z0) {
  Primitive p;
  p.object_id = id;
  p.intensity = intensity;
  const double h = deg2rad(heading);
  p.along = {std::sin(h), std::cos(h)};
  p.side = {std::cos(h), -std::sin(h)};
  p.center = {pos.x, pos.y, z0 + d.height / 2.0};
  p.hl = d.length / 2.0;
  p.hw = d.width / 2.0;
  p.hh = d.height / 2.0;
  return p;
}

void set_screen_rect(Primitive& p, const CameraRig& rig, const CameraBasis& basis, const Dims& d, Vec2 pos,
                     double heading, double z0) {
  const Visibility v = visibility_from_corners(rig, basis, box_corners(pos, heading, d, z0));
  if (!v.in_front) {
    p.px0 = 0;
    p.py0 = 0;
    p.px1 = rig.width - 1;
    p.py1 = rig.height - 1;
    return;
  }
  p.px0 = std::max(0, static_cast<int>(std::floor(v.raw_box.xmin)) - 1);
  p.py0 = std::max(0, static_cast<int>(std::floor(v.raw_box.ymin)) - 1);
  p.px1 = std::min(rig.width - 1, static_cast<int>(std::ceil(v.raw_box.xmax)) + 1);
  p.py1 = std::min(rig.height - 1, static_cast<int>(std::ceil(v.raw_box.ymax)) + 1);
}

// Slab test in the box's local frame.
void intersect_box(const Primitive& p, const Vec3& o, const Vec3& d, const FaceShading& shade, Hit& best) {
  const Vec3 r = o - p.center;
  const double lo[3] = {r.x * p.side.x + r.y * p.side.y, r.x * p.along.x + r.y * p.along.y, r.z};
  const double ld[3] = {d.x * p.side.x + d.y * p.side.y, d.x * p.along.x + d.y * p.along.y, d.z};
  const double half[3] = {p.hw, p.hl, p.hh};
  double tmin = -INFINITY;
  double tmax = INFINITY;
  int axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ld[k]) < 1e-15) {
      if (lo[k] < -half[k] || lo[k] > half[k]) return;
      continue;
    }
    double t0 = (-half[k] - lo[k]) / ld[k];
    double t1 = (half[k] - lo[k]) / ld[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis = k;
    }
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return;
  }
  if (tmin <= kHitEps || tmin >= best.t || axis < 0) return;
  double face = shade.side_x;
  if (axis == 1) face = shade.side_y;
  if (axis == 2) face = ld[2] < 0.0 ? shade.top : shade.bottom;
  best = {tmin, p.intensity * face, p.object_id};
}

void intersect_walls(int bg, const Vec3& o, const Vec3& d, Hit& best) {
  auto try_plane = [&](double t, double along) {
    if (t <= kHitEps || t >= best.t) return;
    const double z = o.z + t * d.z;
    if (z < 0.0 || z > kWallHeight || along < 0.0 || along > kFieldSize) return;
    best = {t, wall_intensity(bg, along, z), -1};
  };
  if (d.x != 0.0) {
    for (double wx : {0.0, kFieldSize}) {
      const double t = (wx - o.x) / d.x;
      try_plane(t, o.y + t * d.y);
    }
  }
  if (d.y != 0.0) {
    for (double wy : {0.0, kFieldSize}) {
      const double t = (wy - o.y) / d.y;
      try_plane(t, o.x + t * d.x);
    }
  }
}

double hash01(std::uint64_t a, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = mix64(a ^ mix64(static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL +
                                          static_cast<std::uint64_t>(j)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto i = static_cast<std::int64_t>(fx);
  const auto j = static_cast<std::int64_t>(fy);
  const double tx = x - fx;
  const double ty = y - fy;
  const double sx = tx * tx * (3 - 2 * tx);
  const double sy = ty * ty * (3 - 2 * ty);
  const double a = hash01(seed, i, j), b = hash01(seed, i + 1, j);
  const double c = hash01(seed, i, j + 1), e = hash01(seed, i + 1, j + 1);
  return (a + (b - a) * sx) * (1 - sy) + (c + (e - c) * sx) * sy;
}

struct PatternParams {
  double base, amp, period, angle;
  std::uint64_t seed;
};

PatternParams pattern_params(int bg) {
  Rng rng(derive_seed(static_cast<std::uint64_t>(bg), "background"));
  PatternParams p;
  p.base = rng.uniform(0.35, 0.7);
  p.amp = rng.uniform(0.08, 0.22);
  p.period = rng.uniform(1.5, 6.0);
  p.angle = rng.uniform(0.0, std::numbers::pi);
  p.seed = rng.next_u64();
  return p;
}

const PatternParams& cached_params(int bg) {
  static const auto table = [] {
    std::array<PatternParams, kBackgroundCount> t{};
    for (int i = 0; i < kBackgroundCount; ++i) t[i] = pattern_params(i);
    return t;
  }();
  return table[static_cast<std::size_t>(std::clamp(bg, 0, kBackgroundCount - 1))];
}

}  // namespace

double color_intensity(Color c) {
  switch (c) {
    case Color::blue: return 0.30;
    case Color::red: return 0.50;
    case Color::grey: return 0.65;
    case Color::green: return 0.42;
    case Color::white: return 0.90;
    case Color::black: return 0.10;
  }
  return 0.5;
}

double ground_intensity(int bg, double x, double y) {
  if (bg == 0) return 0.55;
  const PatternParams& p = cached_params(bg);
  const double u = x * std::cos(p.angle) + y * std::sin(p.angle);
  const double v = -x * std::sin(p.angle) + y * std::cos(p.angle);
  switch (bg % 5) {
    case 0: {  // checker
      const auto cu = static_cast<std::int64_t>(std::floor(u / p.period));
      const auto cv = static_cast<std::int64_t>(std::floor(v / p.period));
      return p.base + (((cu + cv) & 1) ? p.amp : -p.amp);
    }
    case 1: {  // stripes
      const auto s = static_cast<std::int64_t>(std::floor(u / p.period));
      return p.base + ((s & 1) ? p.amp : -p.amp);
    }
    case 2:  // value noise
      return p.base + p.amp * (2.0 * value_noise(p.seed, u / p.period, v / p.period) - 1.0);
    case 3:  // gradient with faint noise
      return p.base + p.amp * (std::clamp(u / kFieldSize, -1.0, 1.0) +
                               0.3 * (value_noise(p.seed, x, y) - 0.5));
    default: {  // grid lines
      const double gu = u / p.period - std::floor(u / p.period);
      const double gv = v / p.period - std::floor(v / p.period);
      const bool line = gu < 0.08 || gv < 0.08;
      return p.base + (line ? -1.5 * p.amp : 0.0);
    }
  }
}

double wall_intensity(int bg, double along, double z) {
  const PatternParams& p = cached_params(bg);
  const auto band = static_cast<std::int64_t>(std::floor(along / (2.0 * p.period)));
  const double v = 0.25 + 0.5 * hash01(p.seed ^ 0xa11ULL, band, 0) + 0.02 * z;
  return std::clamp(v, 0.0, 1.0);
}

RenderConfig render_config(const WorldState& world) {
  RenderConfig cfg;
  cfg.background_id = world.background_id;
  cfg.walls_visible = world.walls_visible;
  return cfg;
}

Frame render(const WorldState& world, const CameraRig& rig, const PtzState& ptz, const RenderConfig& cfg,
             std::vector<int>* hit_ids) {
  const CameraBasis basis = camera_basis(rig, ptz);
  std::vector<Primitive> prims;
  prims.reserve(world.objects.size() * 2);
  for (const auto& obj : world.objects) {
    const Vec2 pos = obj.state.position;
    const double hd = obj.state.heading;
    if (obj.spec.kind == ObjectKind::tree) {
      const Dims trunk = tree_trunk_dims();
      const Dims canopy = tree_canopy_dims();
      Primitive a = make_primitive(obj.spec.id, kTrunkIntensity, pos, hd, trunk, 0.0);
      set_screen_rect(a, rig, basis, trunk, pos, hd, 0.0);
      Primitive b = make_primitive(obj.spec.id, kCanopyIntensity, pos, hd, canopy, trunk.height);
      set_screen_rect(b, rig, basis, canopy, pos, hd, trunk.height);
      prims.push_back(a);
      prims.push_back(b);
    } else {
      Primitive a = make_primitive(obj.spec.id, color_intensity(obj.spec.color), pos, hd, obj.spec.dims, 0.0);
      set_screen_rect(a, rig, basis, obj.spec.dims, pos, hd, 0.0);
      prims.push_back(a);
    }
  }

  Frame out(rig.width, rig.height);
  if (hit_ids) hit_ids->assign(out.pixels.size(), -1);
  const Vec3 o = rig.position;
  for (int y = 0; y < rig.height; ++y) {
    for (int x = 0; x < rig.width; ++x) {
      const Vec3 d = pixel_ray(basis, x + 0.5, y + 0.5);
      Hit best;
      if (d.z < 0.0) {
        const double t = -o.z / d.z;
        best = {t, ground_intensity(cfg.background_id, o.x + t * d.x, o.y + t * d.y), -1};
      }
      if (cfg.walls_visible) intersect_walls(cfg.background_id, o, d, best);
      for (const auto& p : prims) {
        if (x < p.px0 || x > p.px1 || y < p.py0 || y > p.py1) continue;
        intersect_box(p, o, d, cfg.shading, best);
      }
      const std::size_t idx = static_cast<std::size_t>(y) * rig.width + x;
      out.pixels[idx] = static_cast<float>(std::isinf(best.t) ? cfg.sky_intensity : best.value);
      if (hit_ids) (*hit_ids)[idx] = best.object_id;
    }
  }
  return out;
}

AugmentationConfig sample_augmentation(Rng& rng) {
  AugmentationConfig a;
  a.salt_pepper_prob = rng.uniform(0.0, 0.02);
  a.brightness_delta = rng.uniform(-0.15, 0.15);
  a.contrast_scale = rng.uniform(0.8, 1.2);
  a.shadow_enabled = rng.bernoulli(0.3);
  return a;
}

namespace {

bool inside_polygon(const std::array<Vec2, 4>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

}  // namespace

Frame apply_augmentations(Frame f, const AugmentationConfig& cfg, Rng& rng) {
  if (cfg.contrast_scale != 1.0) {
    for (float& v : f.pixels) v = static_cast<float>(0.5 + (v - 0.5) * cfg.contrast_scale);
  }
  if (cfg.brightness_delta != 0.0) {
    for (float& v : f.pixels) v = static_cast<float>(v + cfg.brightness_delta);
  }
  if (cfg.shadow_enabled) {
    // Convex quad: four points at sorted angles around a random center.
    const double cx = rng.uniform(0.0, f.width);
    const double cy = rng.uniform(0.0, f.height);
    const double scale = 0.5 * std::min(f.width, f.height);
    std::array<double, 4> ang{};
    for (double& a : ang) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::sort(ang.begin(), ang.end());
    std::array<Vec2, 4> quad{};
    for (int k = 0; k < 4; ++k) {
      const double r = scale * rng.uniform(0.3, 1.0);
      quad[k] = {cx + r * std::cos(ang[k]), cy + r * std::sin(ang[k])};
    }
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x)
        if (inside_polygon(quad, x + 0.5, y + 0.5)) f.at(x, y) *= 0.6f;
  }
  if (cfg.salt_pepper_prob > 0.0) {
    for (float& v : f.pixels) {
      const double u = rng.uniform();
      if (u < cfg.salt_pepper_prob / 2.0) {
        v = 0.0f;
      } else if (u < cfg.salt_pepper_prob) {
        v = 1.0f;
      }
    }
  }
  for (float& v : f.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return f;
}

Frame downsample(const Frame& in, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0 || in.width % out_w != 0 || in.height % out_h != 0)
    throw std::invalid_argument("downsample: input size must be a multiple of the output size");
  const int bx = in.width / out_w;
  const int by = in.height / out_h;
  if (bx == 1 && by == 1) return in;
  Frame out(out_w, out_h);
  const double inv = 1.0 / (bx * by);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double s = 0.0;
      for (int j = 0; j < by; ++j)
        for (int i = 0; i < bx; ++i) s += in.at(x * bx + i, y * by + j);
      out.at(x, y) = static_cast<float>(s * inv);
    }
  }
  return out;
}

}  // namespace ptz
