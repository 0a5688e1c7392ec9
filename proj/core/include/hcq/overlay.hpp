#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hcq/metrics.hpp"
#include "hcq/scenes.hpp"

namespace hcq {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // [H,W,3]

  void set(long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Scene image with each detection's box outline, joint crosses and mask
/// contour (mask cells upsampled to image pixels) in a per-detection color.
RgbImage render_overlay(const SceneSample& sample, const std::vector<Detection>& detections, std::size_t mask_factor);

/// Binary P6.
void write_ppm(const RgbImage& image, const std::string& path);
RgbImage read_ppm(const std::string& path);

/// One JSON line: sample index, seed and detections (score, box, joints).
std::string predictions_record(std::size_t index, const SceneSample& sample, const std::vector<Detection>& detections);

}  // namespace hcq
