#include "hcq/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hcq {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto s : shape) {
    if (s == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (numel_of(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value in tensor construction");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::wrap(detail::NodePtr node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  if (node_->recorded) throw TapeError("cannot mutate a tensor produced on the tape");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_) throw std::logic_error("use of undefined tensor");
  if (node_->recorded) throw TapeError("requires_grad can only be set on leaves");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_ && !node_->recorded; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->grad;
}

std::vector<double> Tensor::grad_or_zero() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  return Tensor(shape(), node_->data, false);
}

Tensor Tensor::clone() const {
  Tensor t(shape(), node_->data, node_->requires_grad && !node_->recorded);
  return t;
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(detail::NodePtr output, std::vector<detail::NodePtr> inputs, BackwardFn fn) {
  if (consumed_) throw TapeError("tape already consumed by backward; call reset() first");
  output->recorded = true;
  entries_.push_back({std::move(output), std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward called twice without reset");
  if (!loss.defined() || loss.numel() != 1) {
    throw TapeError("backward requires a scalar loss");
  }
  if (!loss.node()->recorded || !loss.requires_grad()) {
    throw TapeError("loss was not produced on the tape from tensors requiring grad");
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->fn(it->output->grad);
  }
  consumed_ = true;
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

void backward(const Tensor& loss) { Tape::active().backward(loss); }

}  // namespace hcq
