#include "hcq/optim.hpp"

#include <cmath>

namespace hcq {

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: params/grads size mismatch");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NonFiniteError("adamw_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * grads[i];
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= options.lr * (m_hat / (std::sqrt(v_hat) + options.eps) + options.weight_decay * params[i]);
  }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options, std::vector<bool> decay)
    : params_(std::move(params)), states_(params_.size()), options_(options), decay_(std::move(decay)) {
  if (decay_.empty()) decay_.assign(params_.size(), true);
  if (decay_.size() != params_.size()) throw ShapeError("AdamW: decay mask size mismatch");
}

double AdamW::step(double clip_norm) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  double sq = 0.0;
  for (const auto& p : params_) {
    grads.push_back(p.grad_or_zero());
    for (double g : grads.back()) {
      if (!std::isfinite(g)) throw NonFiniteError("AdamW: non-finite gradient");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (clip_norm > 0.0) {
    if (norm > clip_norm) {
      const double f = clip_norm / norm;
      for (auto& g : grads)
        for (auto& v : g) v *= f;
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    AdamWOptions o = options_;
    if (!decay_[i]) o.weight_decay = 0.0;
    adamw_step(params_[i].mutable_data(), grads[i], states_[i], o);
  }
  return norm;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace hcq
