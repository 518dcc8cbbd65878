#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dcngan/tensor.hpp"

namespace dcngan {

// Reverse-mode autodiff over Tensor values. A Var is a cheap handle to a node
// in a dynamically built graph; ops record a backward closure that pushes the
// node's gradient into its parents.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_ref() {
    if (grad.empty() && !value.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }

  // Gradient accumulated by backward(); zeros if nothing reached this node.
  const Tensor<T>& grad() const { return node_->grad_ref(); }
  Tensor<T>& mutable_grad() { return node_->grad_ref(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  // Leaf copy of the value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  // Scalar value of a one-element Var.
  T item() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Runs the backward pass from a one-element root, seeding d(root)/d(root) = 1.
template <typename T>
void backward(const Var<T>& root);

// While alive, ops on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds the result node of an op. `backward` is only kept when gradient
// recording is on and some parent requires a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward);

extern template class Var<float>;
extern template class Var<double>;

}  // namespace dcngan
