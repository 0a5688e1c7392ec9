#include "hcq/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hcq/ops.hpp"

namespace hcq {

RegressionLoss parse_regression_loss(const std::string& name) {
  if (name == "laplace") return RegressionLoss::LaplaceNll;
  if (name == "l1") return RegressionLoss::L1;
  throw std::invalid_argument("unknown regression loss: " + name);
}

std::string to_string(RegressionLoss kind) { return kind == RegressionLoss::L1 ? "l1" : "laplace"; }

Tensor bce_loss(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) throw ShapeError("bce_loss: shape mismatch");
  return mean(sub(softplus(logits), mul(logits, targets)));
}

Tensor dice_loss(const Tensor& probabilities, const Tensor& targets) {
  if (probabilities.shape() != targets.shape()) throw ShapeError("dice_loss: shape mismatch");
  const Tensor inter = add_scalar(scale(sum(mul(probabilities, targets)), 2.0), kDiceSmoothing);
  const Tensor denom = add_scalar(add(sum(probabilities), sum(targets)), kDiceSmoothing);
  return add_scalar(neg(div(inter, denom)), 1.0);
}

Tensor dice_loss_rows(const Tensor& probabilities, const Tensor& targets) {
  if (probabilities.shape() != targets.shape() || probabilities.dim() != 2) {
    throw ShapeError("dice_loss_rows: expected matching [N,P] tensors");
  }
  const Tensor inter = add_scalar(scale(sum_last(mul(probabilities, targets)), 2.0), kDiceSmoothing);
  const Tensor denom = add_scalar(add(sum_last(probabilities), sum_last(targets)), kDiceSmoothing);
  return mean(add_scalar(neg(div(inter, denom)), 1.0));
}

Tensor regression_nll(const Tensor& pred, const Tensor& scale_t, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.shape() != scale_t.shape()) {
    throw ShapeError("regression_nll: shape mismatch");
  }
  for (double s : scale_t.data()) {
    if (!(s > 0.0)) throw DomainError("regression_nll: scale must be positive");
  }
  return mean(add(div(abs(sub(pred, target)), scale_t), log(scale(scale_t, 2.0))));
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) { return mean(abs(sub(pred, target))); }

double bce_value(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size() || logits.empty()) throw ShapeError("bce_value: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    s += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return s / static_cast<double>(logits.size());
}

double dice_value(std::span<const double> p, std::span<const double> t) {
  if (p.size() != t.size()) throw ShapeError("dice_value: size mismatch");
  double pt = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pt += p[i] * t[i];
    sp += p[i];
    st += t[i];
  }
  return 1.0 - (2.0 * pt + kDiceSmoothing) / (sp + st + kDiceSmoothing);
}

CostMatrix matching_cost(const PredictionSet& pred, const SceneTargets& targets, const LossWeights& weights) {
  if (!pred.has_masks()) throw std::invalid_argument("matching_cost: predictions carry no masks");
  const std::size_t q = pred.num_queries(), g = targets.size();
  const std::size_t px = pred.mask_logits.size(1);
  CostMatrix cost;
  cost.queries = q;
  cost.targets = g;
  cost.values.assign(q * g, 0.0);
  cost.class_cost.assign(q * g, 0.0);
  cost.mask_cost.assign(q * g, 0.0);
  const auto logits = pred.class_logits.data();
  const auto masks = pred.mask_logits.data();
  std::vector<double> probs(px);
  for (std::size_t i = 0; i < q; ++i) {
    const double x = logits[i];
    // -log sigmoid(x) = softplus(-x)
    const double cls = std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    const auto row = masks.subspan(i * px, px);
    for (std::size_t k = 0; k < px; ++k) probs[k] = 1.0 / (1.0 + std::exp(-row[k]));
    for (std::size_t j = 0; j < g; ++j) {
      const auto& t = targets.instances[j].mask;
      if (t.size() != px) throw ShapeError("matching_cost: target mask resolution mismatch");
      const double mask = bce_value(row, t) + dice_value(probs, t);
      const std::size_t idx = i * g + j;
      cost.class_cost[idx] = weights.cls * cls;
      cost.mask_cost[idx] = weights.mask * mask;
      cost.values[idx] = cost.class_cost[idx] + cost.mask_cost[idx];
    }
  }
  return cost;
}

namespace {

Tensor regression(const Tensor& pred, const Tensor& scale_t, const Tensor& target, RegressionLoss kind) {
  return kind == RegressionLoss::L1 ? l1_loss(pred, target) : regression_nll(pred, scale_t, target);
}

}  // namespace

LossReport total_loss(std::span<const PredictionSet> layers, const SceneTargets& targets,
                      const Assignment& assignment, const LossWeights& weights, RegressionLoss kind,
                      PoseSpace space) {
  if (layers.empty()) throw std::invalid_argument("total_loss: no layers");
  const std::size_t q = layers.front().num_queries();
  const std::size_t g = targets.size();
  if (assignment.query_for_target.size() != g) throw std::invalid_argument("total_loss: assignment size mismatch");

  std::vector<double> cls_target(q, 0.0);
  for (auto idx : assignment.query_for_target) cls_target[idx] = 1.0;
  const Tensor cls_t({q, 1}, cls_target);

  Tensor box_t, pose_t, mask_t;
  if (g > 0) {
    const std::size_t n = targets.instances.front().joints.size();
    std::vector<double> boxes, pose, masks;
    for (const auto& inst : targets.instances) {
      boxes.insert(boxes.end(), {inst.box.x0, inst.box.y0, inst.box.x1, inst.box.y1});
      const auto& src = space == PoseSpace::Canonical ? inst.canonical : inst.joints;
      for (const auto& p : src) pose.insert(pose.end(), {p.x, p.y});
      masks.insert(masks.end(), inst.mask.begin(), inst.mask.end());
    }
    box_t = Tensor({g, 4}, boxes);
    pose_t = Tensor({g, 2 * n}, pose);
    mask_t = Tensor({g, targets.mask_height * targets.mask_width}, masks);
  }

  LossReport report;
  report.weights = weights;
  std::vector<Tensor> terms;
  for (const auto& pred : layers) {
    LayerLoss ll;
    const Tensor lc = bce_loss(pred.class_logits, cls_t);
    ll.cls = lc.item();
    terms.push_back(scale(lc, weights.cls));
    if (g > 0) {
      const auto& idx = assignment.query_for_target;
      const Tensor lb = regression(index_select(pred.corners, 0, idx), index_select(pred.box_scales, 0, idx), box_t, kind);
      const Tensor lp = regression(index_select(pred.pose, 0, idx), index_select(pred.pose_scales, 0, idx), pose_t, kind);
      ll.box = lb.item();
      ll.pose = lp.item();
      terms.push_back(scale(lb, weights.box));
      terms.push_back(scale(lp, weights.pose));
      if (pred.has_masks()) {
        const Tensor logits = index_select(pred.mask_logits, 0, idx);
        if (logits.shape() != mask_t.shape()) throw ShapeError("total_loss: mask resolution mismatch");
        const Tensor ls = add(bce_loss(logits, mask_t), dice_loss_rows(sigmoid(logits), mask_t));
        ll.mask = ls.item();
        ll.has_mask = true;
        terms.push_back(scale(ls, weights.mask));
      }
    }
    report.layers.push_back(ll);
  }
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  report.total = total;
  report.total_value = total.item();
  return report;
}

}  // namespace hcq
