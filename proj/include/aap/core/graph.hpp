#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "aap/core/tensor.hpp"

namespace aap {

// One value in a reverse-mode computation graph. Interior nodes are owned by
// a Graph; parameter leaves are owned by a ParamStore and outlive graphs.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  std::vector<Node*> parents;
  std::function<void(Node&)> backfn;
  bool requires_grad = false;
  bool is_leaf = false;
  uint64_t mark = 0;

  void accum_grad(const Tensor& g) {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    if (!grad.same_shape(g)) shape_fail("accum_grad", grad, g);
    for (int64_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }

  void zero_grad() {
    if (!grad.empty()) grad.fill(0.0f);
  }
};

// Define-by-run tape. Confined to one thread of control; cleared (or
// destroyed) after each backward pass. Node storage is arena-style so that
// deep graphs do not recurse on destruction.
class Graph {
 public:
  Node* make(Tensor value, std::vector<Node*> parents, std::function<void(Node&)> backfn) {
    auto n = std::make_unique<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backfn = std::move(backfn);
    for (Node* p : n->parents)
      if (p && p->requires_grad) n->requires_grad = true;
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
  }

  Node* constant(Tensor value) { return make(std::move(value), {}, nullptr); }

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Reverse-mode sweep from a scalar output. Gradients accumulate into
  // node.grad of every reachable node with requires_grad set.
  void backward(Node* root) {
    if (root->value.size() != 1)
      throw std::invalid_argument("backward: output must be scalar, got " +
                                  root->value.shape_str());
    const uint64_t mark = next_mark();

    // Iterative post-order DFS; recursion would overflow on long BPTT chains.
    std::vector<Node*> order;
    order.reserve(nodes_.size() + 1);
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    root->mark = mark;
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++];
        if (p && p->mark != mark && p->requires_grad) {
          p->mark = mark;
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    // Interior gradients are scratch state of this sweep; leaf gradients
    // accumulate across sweeps until the caller resets them.
    for (Node* n : order)
      if (!n->is_leaf) n->zero_grad();

    root->accum_grad(Tensor::full(root->value.shape(), 1.0f));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backfn && n->requires_grad && !n->grad.empty()) n->backfn(*n);
    }
  }

 private:
  static uint64_t next_mark() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace aap
