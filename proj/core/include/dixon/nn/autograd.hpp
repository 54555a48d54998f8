#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "dixon/nn/tensor.hpp"

namespace dixon::nn {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until the node takes part in a backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents that require grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const noexcept { return !backward_fn; }

  Tensor<T>& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = zeros_like(value);
    if (grad.shape() != value.shape()) grad = zeros_like(value);
    return grad;
  }
};

// Graph recording is on by default; NoGradGuard switches it off for the
// current thread (inference).
bool grad_mode_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Shared handle to a graph node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const noexcept { return node_; }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  T item() const {
    if (node_->value.size() != 1) fail(ErrorCode::kShape, "item() on non-scalar " + node_->value.shape_string());
    return node_->value[0];
  }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.fill(T(0));
  }
  void clear_grad() { node_->grad = Tensor<T>(); }

  // Same value, cut from the graph.
  Var detach() const { return constant(node_->value); }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op result. When grad mode is off or no parent requires grad the
// result is a plain constant and `fn` is dropped.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> fn) {
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (!needs) return Var<T>::constant(std::move(value));
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.shared());
  n->backward_fn = std::move(fn);
  return Var<T>(std::move(n));
}

// Reverse-mode sweep from a scalar. Intermediate gradients are recomputed on
// every call while leaf gradients accumulate, so two calls without zeroing
// double every leaf gradient.
template <typename T>
void backward(const Var<T>& loss);

template <typename T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

// Ordered, named collection of trainable leaves.
template <typename T>
class ParameterSet {
 public:
  Var<T> add(std::string name, Tensor<T> init) {
    for (const auto& e : entries_) {
      if (e.name == name) fail(ErrorCode::kConfig, "duplicate parameter name " + name);
    }
    entries_.push_back({std::move(name), Var<T>::parameter(std::move(init))});
    return entries_.back().var;
  }

  const std::vector<NamedParameter<T>>& entries() const noexcept { return entries_; }
  std::vector<NamedParameter<T>>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

  const Var<T>* find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.var;
    }
    return nullptr;
  }

 private:
  std::vector<NamedParameter<T>> entries_;
};

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss) fail(ErrorCode::kShape, "backward on an empty variable");
  if (loss.value().size() != 1) {
    fail(ErrorCode::kShape, "backward needs a scalar loss, got shape " + loss.value().shape_string());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives parents before children.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Leaves collect this sweep's gradient in a fresh buffer that is added to
  // what they already held at the end, so repeated calls accumulate exactly.
  std::vector<std::pair<Node<T>*, Tensor<T>>> held;
  for (Node<T>* n : order) {
    if (n->is_leaf()) {
      if (!n->grad.empty()) held.emplace_back(n, std::move(n->grad));
      n->grad = Tensor<T>();
    } else {
      n->grad = zeros_like(n->value);
    }
  }
  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
  for (auto& [n, old] : held) {
    Tensor<T>& g = n->grad_buffer();
    if (old.shape() != g.shape()) continue;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = old[i] + g[i];
  }
}

}  // namespace dixon::nn
