#pragma once

// Reverse-mode differentiable tensors.
//
// A tensor is a shared handle to a node holding an NCHW value buffer, an
// optional gradient buffer and, for op outputs, the inputs plus a closure that
// pushes the node's gradient into them. Ops only record that closure when at
// least one input requires a gradient, so inference builds no graph.
//
// BasicTensor<float> is the production type; BasicTensor<double> exists for
// the finite-difference gradient checker.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sid/error.hpp"

namespace sid::nn {

struct Shape {
  std::size_t n = 1, c = 1, h = 1, w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulated into
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Allocates (zeroed) on first use.
  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    return from(shape, std::vector<T>(shape.numel(), T(0)), requires_grad);
  }
  static BasicTensor full(Shape shape, T value, bool requires_grad = false) {
    return from(shape, std::vector<T>(shape.numel(), value), requires_grad);
  }
  static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    require(values.size() == shape.numel(),
            "tensor data length " + std::to_string(values.size()) + " does not match shape " +
                shape.str());
    auto node = std::make_shared<Node<T>>();
    node->shape = shape;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
  }

  explicit BasicTensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::span<const T> data() const { return node_->value; }
  // Mutable access is meant for leaves (parameters, inputs being perturbed).
  std::span<T> mutable_data() { return node_->value; }
  T item() const {
    require(numel() == 1, "item() on a tensor with " + std::to_string(numel()) + " elements");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-length span when no gradient has been accumulated.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  const char* op() const { return node_->op; }
  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

  // Detached copy of the values (no graph, no gradient).
  BasicTensor detach() const { return from(shape(), node_->value, false); }

 private:
  std::shared_ptr<Node<T>> node_;
};

using Tensor = BasicTensor<float>;

// Runs reverse-mode accumulation from a scalar tensor. Returns the number of
// op closures executed (each op node is visited exactly once).
template <typename T>
std::size_t backward(const BasicTensor<T>& loss);

// Converts values between precisions; the result is a leaf.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t, bool requires_grad = false) {
  std::vector<To> values(t.data().begin(), t.data().end());
  return BasicTensor<To>::from(t.shape(), std::move(values), requires_grad);
}

}  // namespace sid::nn
