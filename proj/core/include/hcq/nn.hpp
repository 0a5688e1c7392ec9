#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcq/tensor.hpp"

namespace hcq {

using Rng = std::mt19937_64;

/// Ordered, named collection of learnable leaves. Order is registration
/// order and defines checkpoint layout and optimizer state layout.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor value, bool decay = true);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].value; }
  bool decays(std::size_t i) const { return entries_[i].decay; }
  std::vector<Tensor> tensors() const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  struct Entry {
    std::string name;
    Tensor value;
    bool decay;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

// y = x W + b with W [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.size(0); }
  std::size_t out_features() const { return weight.size(1); }
  void zero();
};

// ReLU between layers, none after the last.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
      std::size_t depth, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void zero();
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace hcq
