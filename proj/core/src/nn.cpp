#include "hcq/nn.hpp"

#include <cmath>

#include "hcq/ops.hpp"

namespace hcq {

Tensor ParameterStore::add(const std::string& name, Tensor value, bool decay) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.push_back({name, value, decay});
  return value;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].value;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor({fan_in, fan_out}, -bound, bound, rng);
}

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  weight = store.add(name + ".weight", xavier_uniform(in, out, rng));
  bias = store.add(name + ".bias", Tensor::zeros({out}), false);
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::zero() {
  for (auto& v : weight.mutable_data()) v = 0.0;
  for (auto& v : bias.mutable_data()) v = 0.0;
}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
         std::size_t depth, Rng& rng) {
  if (depth == 0) throw std::invalid_argument("Mlp depth must be positive");
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t a = i == 0 ? in : hidden;
    const std::size_t b = i + 1 == depth ? out : hidden;
    layers.emplace_back(store, name + "." + std::to_string(i), a, b, rng);
  }
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

void Mlp::zero() {
  for (auto& l : layers) l.zero();
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim) {
  gamma = store.add(name + ".gamma", Tensor::full({dim}, 1.0), false);
  beta = store.add(name + ".beta", Tensor::zeros({dim}), false);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

}  // namespace hcq
