#pragma once

#include <deque>
#include <functional>
#include <unordered_set>
#include <vector>

#include "morphparse/tensor.hpp"

namespace morphparse {

/// One value in a reverse-mode computation graph.
template <class S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  std::vector<Node*> parents;
  std::function<void(Node<S>&)> backprop;  // accumulates into parent grads

  Tensor<S>& ensure_grad() {
    if (grad.empty()) grad = Tensor<S>::zeros(value.rows(), value.cols());
    return grad;
  }
};

/// Arena owning the transient nodes of one forward/backward pass. Parameter
/// nodes live outside the arena (in a ParameterStore) and are only referenced
/// here, so a graph can be dropped wholesale after the optimizer step.
template <class S>
class Graph {
 public:
  Node<S>* make(Tensor<S> value, std::vector<Node<S>*> parents, bool requires_grad,
                std::function<void(Node<S>&)> backprop) {
    nodes_.emplace_back();
    Node<S>& n = nodes_.back();
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    return &n;
  }

  /// Leaf holding a constant (inputs, masks). Opting into gradients makes it
  /// a checkable differentiation point for tests.
  Node<S>* input(Tensor<S> value, bool requires_grad = false) {
    return make(std::move(value), {}, requires_grad, nullptr);
  }

  Node<S>* scalar(S v) { return input(Tensor<S>::scalar(v)); }

  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss. Every node is visited exactly
  /// once in reverse topological order; gradients accumulate additively, so
  /// callers zero parameter gradients between steps.
  void backward(Node<S>& loss) {
    require(loss.value.size() == 1, "backward requires a scalar loss, got [", loss.value.rows(),
            " x ", loss.value.cols(), "]");
    std::vector<Node<S>*> order;
    topo_order(&loss, order);
    loss.ensure_grad().fill(S(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<S>* n = *it;
      if (n->backprop && n->requires_grad && !n->grad.empty()) n->backprop(*n);
    }
  }

 private:
  void topo_order(Node<S>* root, std::vector<Node<S>*>& order) {
    // iterative post-order; graphs get deep (one LSTM step chain per token)
    std::unordered_set<Node<S>*> visited;
    std::vector<std::pair<Node<S>*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node<S>* p = node->parents[idx++];
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::deque<Node<S>> nodes_;
};

}  // namespace morphparse
