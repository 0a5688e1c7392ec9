#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcq {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  // Empty until the first gradient accumulation.
  std::vector<double> grad;
  bool requires_grad = false;
  bool recorded = false;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

/// Dense row-major float64 tensor. Copies share storage; use clone() for a
/// deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only leaves may be mutated in place (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::vector<double> grad_or_zero() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  const detail::NodePtr& node() const { return node_; }
  static Tensor wrap(detail::NodePtr node);

 private:
  detail::NodePtr node_;
};

/// Define-by-run tape. Each thread owns one; ops record into it when any input
/// requires grad and no NoGradGuard is active.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<double>& grad_out)>;

  static Tape& active();

  bool recording() const { return no_grad_depth_ == 0; }
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  void record(detail::NodePtr output, std::vector<detail::NodePtr> inputs, BackwardFn fn);

  // Seeds d loss/d loss = 1 and replays entries in reverse order.
  void backward(const Tensor& loss);
  void reset();

 private:
  struct Entry {
    detail::NodePtr output;
    std::vector<detail::NodePtr> inputs;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
  int no_grad_depth_ = 0;
  friend class NoGradGuard;
};

class NoGradGuard {
 public:
  NoGradGuard() { ++Tape::active().no_grad_depth_; }
  ~NoGradGuard() { --Tape::active().no_grad_depth_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

void backward(const Tensor& loss);

}  // namespace hcq
