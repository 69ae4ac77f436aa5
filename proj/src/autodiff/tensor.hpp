#pragma once

// Dense row-major 2-D tensors with a reverse-mode tape.
//
// Every op result is a Node that records its inputs and a backward closure.
// Node ids grow monotonically with creation, so descending id order is a valid
// reverse topological order; backward() walks the graph in exactly that order,
// which also fixes the order in which gradient contributions are accumulated.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cellclip::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <class T>
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

std::uint64_t next_node_id();

template <class T>
class Var {
 public:
  using value_type = T;

  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  // Leaf tensor. Throws if values.size() != shape.size() or values are not finite.
  static Var leaf(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Var zeros(Shape shape, bool requires_grad = false);
  static Var scalar(T v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::uint64_t id() const { return node_->id; }

  std::span<const T> value() const { return node_->value; }
  // For optimizers and parameter loading; only valid on leaves.
  std::span<T> mutable_value() { return node_->value; }
  T item() const { return node_->value.at(0); }
  T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  // Empty until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::vector<T> grad_or_zero() const;
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
// calls (call zero_grad to reset); interior gradients are reset each call.
template <class T>
void backward(const Var<T>& loss);

// Same values, no history, never receives gradient.
template <class T>
Var<T> detach(const Var<T>& x);

using Tensor = Var<float>;
using Tensor64 = Var<double>;

}  // namespace cellclip::ad
