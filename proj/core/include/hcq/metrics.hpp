#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hcq/keypoints.hpp"

namespace hcq {

enum class Task { Box, Mask, Pose };

std::string to_string(Task task);

struct Detection {
  std::size_t image = 0;
  double score = 0.0;
  Box box;
  std::vector<double> mask;  // binary at mask resolution
  std::vector<Point2> joints;
};

struct GroundTruth {
  std::size_t image = 0;
  Box box;
  std::vector<double> mask;
  std::vector<Point2> joints;
};

inline constexpr double kOksKappa = 0.1;

double box_iou(const Box& a, const Box& b);
double mask_iou(std::span<const double> a, std::span<const double> b);

/// Mean over joints of exp(-d^2 / (2 s^2 kappa^2)) with s^2 = area.
double oks(std::span<const Point2> pred, std::span<const Point2> gt, double area, double kappa = kOksKappa);

double similarity(const Detection& det, const GroundTruth& gt, Task task);

/// Score-ranked greedy matching per image at the threshold, then the area
/// under the precision envelope of the pooled precision-recall curve.
/// Returns 0 when there is no ground truth.
double compute_ap(std::span<const Detection> detections, std::span<const GroundTruth> truths, Task task,
                  double threshold);

/// Drops entries whose box covers fewer than min_size^2 pixels of a
/// size x size image. min_size == 0 keeps everything.
void apply_min_size(std::vector<Detection>& dets, std::vector<GroundTruth>& gts, std::size_t image_size,
                    std::size_t min_size);

struct MetricsReport {
  double box_ap50 = 0.0, box_ap75 = 0.0;
  double mask_ap50 = 0.0, mask_ap75 = 0.0;
  double pose_ap50 = 0.0, pose_ap75 = 0.0;
  std::size_t images = 0;
  std::size_t ground_truths = 0;
  std::size_t detections = 0;
  double wall_clock_seconds = 0.0;
};

MetricsReport score_detections(std::span<const Detection> detections, std::span<const GroundTruth> truths,
                               std::size_t images);

}  // namespace hcq
