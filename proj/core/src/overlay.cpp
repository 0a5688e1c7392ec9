#include "hcq/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace hcq {

namespace {

constexpr std::uint8_t kPalette[][3] = {
    {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
};

}  // namespace

void RgbImage::set(long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
  auto* p = rgb.data() + (static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3;
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

RgbImage render_overlay(const SceneSample& s, const std::vector<Detection>& dets, std::size_t mask_factor) {
  RgbImage img{s.width, s.height, std::vector<std::uint8_t>(s.width * s.height * 3)};
  for (std::size_t i = 0; i < s.image.size(); ++i) {
    img.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(s.image[i], 0.0, 1.0) * 255.0));
  }
  const double w = static_cast<double>(s.width), h = static_cast<double>(s.height);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const auto* c = kPalette[d % std::size(kPalette)];
    const auto& det = dets[d];
    if (!det.mask.empty() && mask_factor) {
      const std::size_t mw = s.width / mask_factor, mh = s.height / mask_factor;
      auto on = [&](long x, long y) {
        if (x < 0 || y < 0 || x >= static_cast<long>(mw) || y >= static_cast<long>(mh)) return false;
        return det.mask[static_cast<std::size_t>(y) * mw + static_cast<std::size_t>(x)] > 0.5;
      };
      for (std::size_t py = 0; py < s.height; ++py) {
        for (std::size_t px = 0; px < s.width; ++px) {
          const long cx = static_cast<long>(px / mask_factor), cy = static_cast<long>(py / mask_factor);
          if (!on(cx, cy)) continue;
          // Edge pixels of a set cell whose neighbor across that edge is unset.
          const bool left = px % mask_factor == 0 && !on(cx - 1, cy);
          const bool right = px % mask_factor == mask_factor - 1 && !on(cx + 1, cy);
          const bool top = py % mask_factor == 0 && !on(cx, cy - 1);
          const bool bottom = py % mask_factor == mask_factor - 1 && !on(cx, cy + 1);
          if (left || right || top || bottom) img.set(static_cast<long>(px), static_cast<long>(py), c[0], c[1], c[2]);
        }
      }
    }
    const long x0 = std::lround(det.box.x0 * w), x1 = std::lround(det.box.x1 * w) - 1;
    const long y0 = std::lround(det.box.y0 * h), y1 = std::lround(det.box.y1 * h) - 1;
    for (long x = x0; x <= x1; ++x) {
      img.set(x, y0, c[0], c[1], c[2]);
      img.set(x, y1, c[0], c[1], c[2]);
    }
    for (long y = y0; y <= y1; ++y) {
      img.set(x0, y, c[0], c[1], c[2]);
      img.set(x1, y, c[0], c[1], c[2]);
    }
    for (const auto& j : det.joints) {
      const long jx = static_cast<long>(std::floor(j.x * w)), jy = static_cast<long>(std::floor(j.y * h));
      for (long k = -2; k <= 2; ++k) {
        img.set(jx + k, jy, 255, 255, 255);
        img.set(jx, jy + k, 255, 255, 255);
      }
    }
  }
  return img;
}

void write_ppm(const RgbImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  RgbImage img;
  int maxval = 0;
  if (!(in >> magic >> img.width >> img.height >> maxval) || magic != "P6" || maxval != 255) {
    throw std::runtime_error("not a binary 8-bit PPM: " + path);
  }
  in.get();
  img.rgb.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.rgb.size()) throw std::runtime_error("truncated PPM: " + path);
  return img;
}

std::string predictions_record(std::size_t index, const SceneSample& s, const std::vector<Detection>& dets) {
  nlohmann::json j = {{"sample", index}, {"seed", s.seed}, {"detections", nlohmann::json::array()}};
  for (const auto& d : dets) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& p : d.joints) joints.push_back({p.x, p.y});
    j["detections"].push_back({{"score", d.score}, {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}, {"joints", joints}});
  }
  return j.dump();
}

}  // namespace hcq
