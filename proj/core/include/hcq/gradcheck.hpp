#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hcq/tensor.hpp"

namespace hcq {

struct GradCheckOptions {
  std::size_t points = 20;
  double step = 1e-6;
  // Relative error denominators never drop below this.
  double floor = 1e-3;
  double threshold = 1e-4;
  std::uint64_t seed = 7;
};

/// One random evaluation point: the leaves to differentiate and a closure
/// computing the op from them. Non-scalar outputs are contracted against fixed
/// random weights.
struct GradPoint {
  std::vector<Tensor> leaves;
  std::function<Tensor()> evaluate;
  // 0 checks every coordinate; otherwise a random subset of this size.
  std::size_t max_coords = 0;
};

struct GradCase {
  std::string name;
  // Piecewise-smooth cases redraw points where the finite difference is not
  // stable under halving the step (a kink lies within the stencil).
  bool piecewise = false;
  std::function<GradPoint(std::mt19937_64&)> draw;
};

struct GradCheckResult {
  std::string name;
  std::size_t points = 0;
  std::size_t redrawn = 0;
  double max_relative_error = 0.0;
  double seconds = 0.0;
};

/// max over leaves of ||analytic - numeric||_inf / max(floor, ||analytic||_inf, ||numeric||_inf)
/// with central differences. Sets `unstable` when the numeric estimate moves
/// by more than 1e-3 relative on halving the step.
double relative_gradient_error(const GradPoint& point, const GradCheckOptions& options, std::mt19937_64& rng,
                               bool* unstable = nullptr);

GradCheckResult run_grad_case(const GradCase& c, const GradCheckOptions& options);

/// Every differentiable op plus keypoint geometry, attention, heads, losses
/// and a tiny end-to-end model.
std::vector<GradCase> standard_grad_cases();

std::vector<GradCheckResult> grad_check_sweep(const GradCheckOptions& options);

}  // namespace hcq
