#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hcq/heads.hpp"
#include "hcq/keypoints.hpp"
#include "hcq/matching.hpp"
#include "hcq/tensor.hpp"

namespace hcq {

struct LossWeights {
  double cls = 2.0;
  double mask = 5.0;
  double box = 0.2;
  double pose = 0.2;
};

enum class RegressionLoss { LaplaceNll, L1 };

RegressionLoss parse_regression_loss(const std::string& name);
std::string to_string(RegressionLoss kind);

inline constexpr double kDiceSmoothing = 1.0;

// Mean of max(x,0) - x t + log(1 + exp(-|x|)).
Tensor bce_loss(const Tensor& logits, const Tensor& targets);
// 1 - (2 sum(p t) + 1) / (sum(p) + sum(t) + 1) over the whole tensor.
Tensor dice_loss(const Tensor& probabilities, const Tensor& targets);
// Per-row dice of [N, P] tensors, averaged over rows.
Tensor dice_loss_rows(const Tensor& probabilities, const Tensor& targets);
// Mean of |pred - target| / scale + ln(2 scale). Throws DomainError for scale <= 0.
Tensor regression_nll(const Tensor& pred, const Tensor& scale, const Tensor& target);
Tensor l1_loss(const Tensor& pred, const Tensor& target);

double bce_value(std::span<const double> logits, std::span<const double> targets);
double dice_value(std::span<const double> probabilities, std::span<const double> targets);

/// Ground truth of one scene expressed in the units the losses consume.
struct InstanceTarget {
  Box box;
  std::vector<Point2> joints;     // image space, normalized
  std::vector<Point2> canonical;  // joints relative to box
  std::vector<double> mask;       // binary, mask resolution, row-major
};

struct SceneTargets {
  std::vector<InstanceTarget> instances;
  std::size_t mask_height = 0;
  std::size_t mask_width = 0;

  std::size_t size() const { return instances.size(); }
};

/// cost = w_c * (-log sigmoid(logit)) + w_s * (bce + dice) per (query, GT).
CostMatrix matching_cost(const PredictionSet& final_layer, const SceneTargets& targets, const LossWeights& weights);

struct LayerLoss {
  double cls = 0.0;
  double mask = 0.0;  // final layer only
  double box = 0.0;
  double pose = 0.0;
  bool has_mask = false;
};

struct LossReport {
  std::vector<LayerLoss> layers;
  LossWeights weights;
  double total_value = 0.0;
  Tensor total;  // differentiable scalar
};

/// Sum over layers of w_c L_c + w_s L_s + w_b L_b + w_p L_p, with the final
/// layer assignment reused for every layer. Unmatched queries only incur the
/// no-object classification term; L_s applies to layers carrying masks.
LossReport total_loss(std::span<const PredictionSet> layers, const SceneTargets& targets,
                      const Assignment& assignment, const LossWeights& weights, RegressionLoss regression,
                      PoseSpace space);

}  // namespace hcq
