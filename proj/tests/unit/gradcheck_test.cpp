#include <gtest/gtest.h>

#include "hcq/gradcheck.hpp"
#include "hcq/ops.hpp"

using namespace hcq;

TEST(GradCheck, StandardSweepPasses) {
  GradCheckOptions o;
  o.points = 3;
  for (const auto& r : grad_check_sweep(o)) EXPECT_LT(r.max_relative_error, o.threshold) << r.name;
}

TEST(GradCheck, DetectsWrongGradient) {
  GradCheckOptions o;
  std::mt19937_64 rng(1);
  Tensor x({3}, {0.3, -0.7, 1.1}, true);
  GradPoint p;
  p.leaves = {x};
  // Forward value of exp(x) with a backward pass that is twice the truth.
  p.evaluate = [x] {
    const Tensor e = exp(x);
    return add(e, sub(e.detach(), e.detach()));
  };
  EXPECT_LT(relative_gradient_error(p, o, rng), 1e-6);
  p.evaluate = [x] { return add(scale(exp(x), 2.0), scale(exp(x.detach()), -1.0)); };
  EXPECT_GT(relative_gradient_error(p, o, rng), 0.1);
}

TEST(GradCheck, CoversEveryOp) {
  std::vector<std::string> names;
  for (const auto& c : standard_grad_cases()) names.push_back(c.name);
  for (const char* op : {"matmul", "softmax", "layer_norm", "bilinear_sample", "pose_to_image", "model_total_loss"})
    EXPECT_NE(std::find(names.begin(), names.end(), op), names.end()) << op;
}
