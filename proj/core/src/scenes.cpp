#include "hcq/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hcq {

namespace {

struct Segment {
  Point2 a, b;
};

struct Figure {
  std::vector<Point2> joints;  // pixel units
  std::vector<Segment> segments;
  std::array<double, 3> color{};
};

Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }

// Unit vector at angle theta from straight down, positive towards +x.
Point2 limb(double theta) { return {std::sin(theta), std::cos(theta)}; }

constexpr double kDeg = std::numbers::pi / 180.0;

Figure five_joint_figure(double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const Point2 neck{0.0, -0.22 * h};
  const Point2 pelvis{range(-0.03, 0.03) * h, 0.12 * h};
  const Point2 head = neck + Point2{range(-0.06, 0.06) * h, -0.2 * h};
  const Point2 lhand = neck + 0.34 * h * limb(-range(20, 160) * kDeg);
  const Point2 rhand = neck + 0.34 * h * limb(range(20, 160) * kDeg);
  const Point2 lfoot = pelvis + 0.38 * h * limb(-range(5, 45) * kDeg);
  const Point2 rfoot = pelvis + 0.38 * h * limb(range(5, 45) * kDeg);
  Figure f;
  f.joints = {head, lhand, rhand, lfoot, rfoot};
  f.segments = {{head, neck}, {neck, pelvis}, {neck, lhand}, {neck, rhand}, {pelvis, lfoot}, {pelvis, rfoot}};
  return f;
}

Figure coco_figure(double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const Point2 nose{range(-0.02, 0.02) * h, -0.42 * h};
  const Point2 leye = nose + Point2{-0.03 * h, -0.03 * h};
  const Point2 reye = nose + Point2{0.03 * h, -0.03 * h};
  const Point2 lear = nose + Point2{-0.06 * h, -0.01 * h};
  const Point2 rear = nose + Point2{0.06 * h, -0.01 * h};
  const Point2 lsho{-0.12 * h, -0.28 * h};
  const Point2 rsho{0.12 * h, -0.28 * h};
  const Point2 lhip{-0.08 * h, 0.08 * h};
  const Point2 rhip{0.08 * h, 0.08 * h};
  const double la = range(10, 150) * kDeg, ra = range(10, 150) * kDeg;
  const Point2 lelb = lsho + 0.18 * h * limb(-la);
  const Point2 relb = rsho + 0.18 * h * limb(ra);
  const Point2 lwri = lelb + 0.17 * h * limb(-la - range(-40, 40) * kDeg);
  const Point2 rwri = relb + 0.17 * h * limb(ra + range(-40, 40) * kDeg);
  const double ll = range(0, 35) * kDeg, rl = range(0, 35) * kDeg;
  const Point2 lknee = lhip + 0.22 * h * limb(-ll);
  const Point2 rknee = rhip + 0.22 * h * limb(rl);
  const Point2 lank = lknee + 0.22 * h * limb(-ll + range(-20, 20) * kDeg);
  const Point2 rank = rknee + 0.22 * h * limb(rl + range(-20, 20) * kDeg);
  const Point2 neck = 0.5 * (lsho + rsho);
  Figure f;
  f.joints = {nose, leye, reye, lear, rear, lsho, rsho, lelb, relb, lwri, rwri, lhip, rhip, lknee, rknee, lank, rank};
  f.segments = {{nose, leye}, {nose, reye}, {leye, lear}, {reye, rear}, {nose, neck},   {lsho, rsho},
                {lsho, lelb}, {lelb, lwri}, {rsho, relb}, {relb, rwri}, {lsho, lhip},   {rsho, rhip},
                {lhip, rhip}, {lhip, lknee}, {lknee, lank}, {rhip, rknee}, {rknee, rank}};
  return f;
}

void transform(Figure& f, double angle, Point2 offset) {
  const double c = std::cos(angle), s = std::sin(angle);
  auto apply = [&](Point2& p) { p = Point2{c * p.x - s * p.y + offset.x, s * p.x + c * p.y + offset.y}; };
  for (auto& j : f.joints) apply(j);
  for (auto& seg : f.segments) {
    apply(seg.a);
    apply(seg.b);
  }
}

struct Extent {
  double x0, y0, x1, y1;
};

Extent extent_of(const Figure& f) {
  Extent e{1e300, 1e300, -1e300, -1e300};
  for (const auto& seg : f.segments) {
    for (const Point2& p : {seg.a, seg.b}) {
      e.x0 = std::min(e.x0, p.x);
      e.y0 = std::min(e.y0, p.y);
      e.x1 = std::max(e.x1, p.x);
      e.y1 = std::max(e.y1, p.y);
    }
  }
  return e;
}

double extent_iou(const Extent& a, const Extent& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double segment_distance(Point2 p, const Segment& s) {
  const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.a.x + t * dx - p.x, ey = s.a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

constexpr std::size_t kMinMaskPixels = 4;

}  // namespace

void SceneConfig::validate() const {
  if (image_size == 0) throw std::invalid_argument("scene: image_size must be positive");
  if (min_instances > max_instances) throw std::invalid_argument("scene: min_instances > max_instances");
  if (n_pose != 5 && n_pose != 17) throw std::invalid_argument("scene: n_pose must be 5 or 17");
  if (!(thickness > 0)) throw std::invalid_argument("scene: thickness must be positive");
  if (!(min_figure > 0 && min_figure <= max_figure && max_figure < 1.0)) {
    throw std::invalid_argument("scene: figure size range must satisfy 0 < min <= max < 1");
  }
}

SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const std::size_t s = config.image_size;
  const double sd = static_cast<double>(s);
  const double t = config.thickness;

  const std::size_t count =
      config.min_instances + static_cast<std::size_t>(u(rng) * static_cast<double>(config.max_instances -
                                                                                     config.min_instances + 1));
  const std::size_t n_fig = std::min(count, config.max_instances);

  std::vector<Figure> figures;
  std::vector<Extent> placed;
  for (std::size_t i = 0; i < n_fig; ++i) {
    const double h = range(config.min_figure, config.max_figure) * sd;
    Figure base = config.n_pose == 5 ? five_joint_figure(h, rng) : coco_figure(h, rng);
    const double angle = range(-15, 15) * kDeg;
    transform(base, angle, {0.0, 0.0});
    const Extent e = extent_of(base);
    const double margin = t + 1.0;
    const double lo_x = margin - e.x0, hi_x = sd - margin - e.x1;
    const double lo_y = margin - e.y0, hi_y = sd - margin - e.y1;
    if (hi_x < lo_x || hi_y < lo_y) continue;
    Figure f;
    Extent fe{};
    for (int attempt = 0; attempt < 30; ++attempt) {
      f = base;
      transform(f, 0.0, {range(lo_x, hi_x), range(lo_y, hi_y)});
      fe = extent_of(f);
      bool ok = true;
      for (const auto& other : placed) ok = ok && extent_iou(fe, other) <= 0.3;
      if (ok) break;
    }
    const double g = range(0.45, 1.0);
    for (auto& c : f.color) c = std::clamp(g * (1.0 + 0.15 * range(-1.0, 1.0)), 0.0, 1.0);
    placed.push_back(fe);
    figures.push_back(std::move(f));
  }

  SceneSample sample;
  sample.seed = seed;
  sample.height = s;
  sample.width = s;
  sample.image.assign(s * s * 3, 0.0);
  std::vector<int> owner(s * s, -1);
  for (std::size_t fi = 0; fi < figures.size(); ++fi) {
    const auto& f = figures[fi];
    const Extent e = extent_of(f);
    const auto x_lo = static_cast<long>(std::max(0.0, std::floor(e.x0 - t)));
    const auto y_lo = static_cast<long>(std::max(0.0, std::floor(e.y0 - t)));
    const auto x_hi = static_cast<long>(std::min(sd - 1, std::ceil(e.x1 + t)));
    const auto y_hi = static_cast<long>(std::min(sd - 1, std::ceil(e.y1 + t)));
    for (long y = y_lo; y <= y_hi; ++y)
      for (long x = x_lo; x <= x_hi; ++x) {
        const Point2 p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
        double d = 1e300;
        for (const auto& seg : f.segments) d = std::min(d, segment_distance(p, seg));
        const double cover = std::clamp(0.5 * t + 0.5 - d, 0.0, 1.0);
        const std::size_t idx = static_cast<std::size_t>(y) * s + static_cast<std::size_t>(x);
        if (cover > 0) {
          for (int c = 0; c < 3; ++c) {
            double& px = sample.image[idx * 3 + c];
            px = px * (1.0 - cover) + cover * f.color[c];
          }
        }
        if (d <= 0.5 * t) owner[idx] = static_cast<int>(fi);
      }
  }
  for (std::size_t fi = 0; fi < figures.size(); ++fi) {
    Instance inst;
    inst.mask.assign(s * s, 0);
    std::size_t pixels = 0;
    for (std::size_t i = 0; i < s * s; ++i) {
      if (owner[i] == static_cast<int>(fi)) {
        inst.mask[i] = 1;
        ++pixels;
      }
    }
    if (pixels < kMinMaskPixels) continue;
    inst.box = *tight_box(inst.mask, s, s);
    for (const auto& j : figures[fi].joints) inst.joints.push_back({j.x / sd, j.y / sd});
    sample.instances.push_back(std::move(inst));
  }
  return sample;
}

std::vector<SceneSample> generate_scenes(std::uint64_t first_seed, std::size_t count, const SceneConfig& config) {
  std::vector<SceneSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(first_seed + i, config));
  return out;
}

std::optional<Box> tight_box(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width) {
  std::size_t x0 = width, y0 = height, x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      if (!mask[y * width + x]) continue;
      any = true;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  if (!any) return std::nullopt;
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  return Box{static_cast<double>(x0) / w, static_cast<double>(y0) / h, static_cast<double>(x1) / w,
             static_cast<double>(y1) / h};
}

std::vector<double> downsample_mask(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width,
                                    std::size_t factor) {
  if (factor == 0 || height % factor || width % factor) {
    throw std::invalid_argument("downsample_mask: dimensions must be divisible by the factor");
  }
  const std::size_t h = height / factor, w = width / factor;
  std::vector<double> out(h * w, 0.0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      if (mask[y * width + x]) out[(y / factor) * w + x / factor] = 1.0;
  return out;
}

SceneSample scale_and_crop(const SceneSample& sample, double factor, std::size_t crop_x, std::size_t crop_y,
                           std::size_t crop_size) {
  if (!(factor > 0)) throw std::invalid_argument("scale_and_crop: factor must be positive");
  const std::size_t h = sample.height, w = sample.width;
  const std::size_t out = crop_size ? crop_size : w;
  const auto scaled_w = static_cast<std::size_t>(std::lround(static_cast<double>(w) * factor));
  const auto scaled_h = static_cast<std::size_t>(std::lround(static_cast<double>(h) * factor));
  SceneSample res;
  res.seed = sample.seed;
  res.height = out;
  res.width = out;
  res.image.assign(out * out * 3, 0.0);

  auto src_pixel = [&](std::size_t o, std::size_t crop, std::size_t scaled, std::size_t n, double& coord) {
    const std::size_t sp = o + crop;
    if (sp >= scaled) return false;
    coord = (static_cast<double>(sp) + 0.5) / factor;
    return coord < static_cast<double>(n);
  };

  for (std::size_t y = 0; y < out; ++y)
    for (std::size_t x = 0; x < out; ++x) {
      double sx = 0, sy = 0;
      if (!src_pixel(x, crop_x, scaled_w, w, sx) || !src_pixel(y, crop_y, scaled_h, h, sy)) continue;
      const double fx = std::clamp(sx - 0.5, 0.0, static_cast<double>(w - 1));
      const double fy = std::clamp(sy - 0.5, 0.0, static_cast<double>(h - 1));
      const auto x0 = static_cast<std::size_t>(fx), y0 = static_cast<std::size_t>(fy);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double ax = fx - static_cast<double>(x0), ay = fy - static_cast<double>(y0);
      for (int c = 0; c < 3; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) { return sample.image[(yy * w + xx) * 3 + c]; };
        res.image[(y * out + x) * 3 + c] = (1 - ax) * (1 - ay) * at(y0, x0) + ax * (1 - ay) * at(y0, x1) +
                                           (1 - ax) * ay * at(y1, x0) + ax * ay * at(y1, x1);
      }
    }

  for (const auto& inst : sample.instances) {
    Instance ni;
    ni.mask.assign(out * out, 0);
    for (std::size_t y = 0; y < out; ++y)
      for (std::size_t x = 0; x < out; ++x) {
        double sx = 0, sy = 0;
        if (!src_pixel(x, crop_x, scaled_w, w, sx) || !src_pixel(y, crop_y, scaled_h, h, sy)) continue;
        const auto cx = std::min(static_cast<std::size_t>(sx), w - 1);
        const auto cy = std::min(static_cast<std::size_t>(sy), h - 1);
        ni.mask[y * out + x] = inst.mask[cy * w + cx];
      }
    const auto box = tight_box(ni.mask, out, out);
    if (!box) continue;
    ni.box = *box;
    const double od = static_cast<double>(out);
    for (const auto& j : inst.joints) {
      ni.joints.push_back({(j.x * static_cast<double>(w) * factor - static_cast<double>(crop_x)) / od,
                           (j.y * static_cast<double>(h) * factor - static_cast<double>(crop_y)) / od});
    }
    res.instances.push_back(std::move(ni));
  }
  return res;
}

SceneSample augment(const SceneSample& sample, std::mt19937_64& rng, const AugmentConfig& config) {
  if (!config.enabled) return sample;
  std::uniform_real_distribution<double> u(config.min_scale, config.max_scale);
  const double factor = u(rng);
  const std::size_t out = config.crop_size ? config.crop_size : sample.width;
  const auto scaled_w = static_cast<std::size_t>(std::lround(static_cast<double>(sample.width) * factor));
  const auto scaled_h = static_cast<std::size_t>(std::lround(static_cast<double>(sample.height) * factor));
  std::size_t cx = 0, cy = 0;
  if (scaled_w > out) cx = std::uniform_int_distribution<std::size_t>(0, scaled_w - out)(rng);
  if (scaled_h > out) cy = std::uniform_int_distribution<std::size_t>(0, scaled_h - out)(rng);
  return scale_and_crop(sample, factor, cx, cy, out);
}

}  // namespace hcq
