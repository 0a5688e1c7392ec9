#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcq/tensor.hpp"

namespace hcq {

struct AdamWOptions {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// Decoupled weight decay: w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w).
// Throws NonFiniteError without touching params or state when any grad is
// non-finite.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options);

class AdamW {
 public:
  // decay[i] == false exempts params[i] from weight decay; empty means all decay.
  AdamW(std::vector<Tensor> params, AdamWOptions options, std::vector<bool> decay = {});

  // Missing grads count as zero. Clip threshold <= 0 disables global-norm
  // clipping. Returns the pre-clip global gradient norm.
  double step(double clip_norm = 0.0);
  void zero_grad();

  AdamWOptions& options() { return options_; }
  const std::vector<AdamWState>& states() const { return states_; }
  std::vector<AdamWState>& states() { return states_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamWState> states_;
  AdamWOptions options_;
  std::vector<bool> decay_;
};

}  // namespace hcq
