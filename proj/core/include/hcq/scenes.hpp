#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "hcq/keypoints.hpp"

namespace hcq {

struct SceneConfig {
  std::size_t image_size = 128;
  std::size_t min_instances = 1;
  std::size_t max_instances = 4;
  // 5 (head, hands, feet) or 17 (COCO topology).
  std::size_t n_pose = 5;
  double thickness = 3.0;
  // Figure height as a fraction of the image size.
  double min_figure = 0.3;
  double max_figure = 0.55;

  void validate() const;
};

struct Instance {
  Box box;                     // tight box of the visible mask, normalized
  std::vector<Point2> joints;  // normalized image coordinates
  std::vector<std::uint8_t> mask;  // [H,W] binary
};

struct SceneSample {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> image;  // [H,W,3] in [0,1]
  std::vector<Instance> instances;
  std::uint64_t seed = 0;
};

/// Pure function of (seed, config). Figures listed later are drawn in front
/// and own overlapping pixels.
SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config);

std::vector<SceneSample> generate_scenes(std::uint64_t first_seed, std::size_t count, const SceneConfig& config);

/// Tight box in pixel-edge convention, normalized by (W, H); nullopt for an
/// empty mask.
std::optional<Box> tight_box(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width);

/// Max-pool a binary [H,W] mask by factor: a cell is set when any pixel is.
std::vector<double> downsample_mask(const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width,
                                    std::size_t factor);

struct AugmentConfig {
  bool enabled = false;
  double min_scale = 0.1;
  double max_scale = 2.0;
  // 0 keeps the input resolution.
  std::size_t crop_size = 0;
};

/// Scale by `factor`, crop a crop_size window at (crop_x, crop_y) in scaled
/// pixels, zero-pad right/bottom. Image is resampled bilinearly, masks by
/// nearest neighbor; boxes are re-derived from the transformed masks and
/// instances whose mask leaves the crop are dropped.
SceneSample scale_and_crop(const SceneSample& sample, double factor, std::size_t crop_x, std::size_t crop_y,
                           std::size_t crop_size);

/// Random scale in [min_scale, max_scale] and random crop offset.
SceneSample augment(const SceneSample& sample, std::mt19937_64& rng, const AugmentConfig& config);

}  // namespace hcq
