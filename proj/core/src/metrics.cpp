#include "hcq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hcq {

std::string to_string(Task task) {
  switch (task) {
    case Task::Box: return "box";
    case Task::Mask: return "mask";
    case Task::Pose: return "pose";
  }
  return "unknown";
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = std::max(0.0, a.area()) + std::max(0.0, b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double mask_iou(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask_iou: size mismatch");
  double inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] > 0.5, y = b[i] > 0.5;
    inter += (x && y) ? 1.0 : 0.0;
    uni += (x || y) ? 1.0 : 0.0;
  }
  return uni > 0 ? inter / uni : 0.0;
}

double oks(std::span<const Point2> pred, std::span<const Point2> gt, double area, double kappa) {
  if (pred.size() != gt.size() || gt.empty()) throw std::invalid_argument("oks: joint count mismatch");
  if (!(area > 0)) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double dx = pred[i].x - gt[i].x, dy = pred[i].y - gt[i].y;
    s += std::exp(-(dx * dx + dy * dy) / (2.0 * area * kappa * kappa));
  }
  return s / static_cast<double>(gt.size());
}

double similarity(const Detection& det, const GroundTruth& gt, Task task) {
  switch (task) {
    case Task::Box: return box_iou(det.box, gt.box);
    case Task::Mask: return mask_iou(det.mask, gt.mask);
    case Task::Pose: return oks(det.joints, gt.joints, gt.box.area());
  }
  return 0.0;
}

double compute_ap(std::span<const Detection> detections, std::span<const GroundTruth> truths, Task task,
                  double threshold) {
  if (truths.empty()) return 0.0;
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });
  std::vector<bool> taken(truths.size(), false);
  std::vector<bool> tp(order.size(), false);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& det = detections[order[r]];
    double best = threshold;
    long best_gt = -1;
    for (std::size_t g = 0; g < truths.size(); ++g) {
      if (taken[g] || truths[g].image != det.image) continue;
      const double s = similarity(det, truths[g], task);
      if (s >= best && (best_gt < 0 || s > best)) {
        best = s;
        best_gt = static_cast<long>(g);
      }
    }
    if (best_gt >= 0) {
      taken[static_cast<std::size_t>(best_gt)] = true;
      tp[r] = true;
    }
  }
  const double n_gt = static_cast<double>(truths.size());
  std::vector<double> precision(order.size()), recall(order.size());
  double tps = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    tps += tp[r] ? 1.0 : 0.0;
    precision[r] = tps / static_cast<double>(r + 1);
    recall[r] = tps / n_gt;
  }
  for (std::size_t r = order.size(); r-- > 1;) precision[r - 1] = std::max(precision[r - 1], precision[r]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!tp[r]) continue;
    ap += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return ap;
}

void apply_min_size(std::vector<Detection>& dets, std::vector<GroundTruth>& gts, std::size_t image_size,
                    std::size_t min_size) {
  if (min_size == 0) return;
  const double px = static_cast<double>(image_size) * static_cast<double>(image_size);
  const double limit = static_cast<double>(min_size * min_size);
  std::erase_if(dets, [&](const Detection& d) { return d.box.area() * px < limit; });
  std::erase_if(gts, [&](const GroundTruth& g) { return g.box.area() * px < limit; });
}

MetricsReport score_detections(std::span<const Detection> detections, std::span<const GroundTruth> truths,
                               std::size_t images) {
  MetricsReport r;
  r.images = images;
  r.ground_truths = truths.size();
  r.detections = detections.size();
  r.box_ap50 = compute_ap(detections, truths, Task::Box, 0.5);
  r.box_ap75 = compute_ap(detections, truths, Task::Box, 0.75);
  r.mask_ap50 = compute_ap(detections, truths, Task::Mask, 0.5);
  r.mask_ap75 = compute_ap(detections, truths, Task::Mask, 0.75);
  r.pose_ap50 = compute_ap(detections, truths, Task::Pose, 0.5);
  r.pose_ap75 = compute_ap(detections, truths, Task::Pose, 0.75);
  return r;
}

}  // namespace hcq
