#include "autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "util/error.hpp"

namespace cellclip::ad {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

template <class T>
Var<T> Var<T>::leaf(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape.rows == 0 || shape.cols == 0) fail(Errc::shape, "tensor dimensions must be positive");
  if (values.size() != shape.size()) {
    fail(Errc::shape, "leaf expects {} values for {}x{}, got {}", shape.size(), shape.rows,
         shape.cols, values.size());
  }
  for (T v : values) {
    if (!std::isfinite(v)) fail(Errc::numeric, "non-finite value in leaf tensor");
  }
  auto node = std::make_shared<Node<T>>();
  node->id = next_node_id();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

template <class T>
Var<T> Var<T>::zeros(Shape shape, bool requires_grad) {
  return leaf(shape, std::vector<T>(shape.size(), T(0)), requires_grad);
}

template <class T>
Var<T> Var<T>::scalar(T v, bool requires_grad) {
  return leaf({1, 1}, {v}, requires_grad);
}

template <class T>
std::vector<T> Var<T>::grad_or_zero() const {
  if (node_->grad.empty()) return std::vector<T>(size(), T(0));
  return node_->grad;
}

template <class T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) fail(Errc::invalid_argument, "backward on undefined tensor");
  if (loss.size() != 1) {
    fail(Errc::shape, "backward needs a scalar loss, got {}x{}", loss.rows(), loss.cols());
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  for (Node<T>* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), T(0));
  }
  auto* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += T(1);
  for (Node<T>* n : order) {
    if (n->backward) n->backward(*n);
  }
}

template <class T>
Var<T> detach(const Var<T>& x) {
  return Var<T>::leaf(x.shape(), std::vector<T>(x.value().begin(), x.value().end()), false);
}

template class Var<float>;
template class Var<double>;
template void backward(const Var<float>&);
template void backward(const Var<double>&);
template Var<float> detach(const Var<float>&);
template Var<double> detach(const Var<double>&);

}  // namespace cellclip::ad
