#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "eegnet/tensor.hpp"

namespace eegnet {

/// Handle to a node on a Graph tape.
struct Value {
  int id = -1;
};

/// Append-only tape of recorded operations. Nodes always appear after their
/// inputs, so one reverse sweep visits every node exactly once. Parameter
/// leaves accumulate into the bound Tensor's grad slot; interior grads are
/// scratch that is reset at every backward call.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&)>;

  Graph() { nodes_.reserve(64); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding a plain input; no gradient is tracked for it.
  Value input(Tensor t) {
    nodes_.push_back(Node{std::move(t), nullptr, {}, {}, nullptr, false});
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  /// Leaf bound to an external parameter tensor; backward accumulates into
  /// its grad slot additively across calls.
  Value param(Tensor* p) {
    p->requires_grad = true;
    p->ensure_grad();
    nodes_.push_back(Node{Tensor{}, p, {}, {}, nullptr, true});
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  /// Interior node. The backward closure is kept only when some ancestor
  /// requires gradients.
  Value make(Tensor value, std::vector<int> parents, BackwardFn fn) {
    bool live = false;
    for (int pid : parents) live = live || nodes_[static_cast<size_t>(pid)].live;
    Node n{std::move(value), nullptr, {}, std::move(parents), nullptr, live};
    if (live) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& val(Value v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    return n.bound ? *n.bound : n.value;
  }

  const Shape& shape(Value v) const { return val(v).shape; }

  bool live(Value v) const { return nodes_[static_cast<size_t>(v.id)].live; }

  /// Gradient buffer of a node; valid during a backward sweep.
  std::vector<Real>& grad(Value v) { return grad_at(v.id); }

  /// Reverse sweep from a scalar loss. Interior grads are zeroed first;
  /// parameter grads are left untouched so repeated calls accumulate.
  void backward(Value loss) {
    const Node& ln = nodes_[static_cast<size_t>(loss.id)];
    const Tensor& lv = ln.bound ? *ln.bound : ln.value;
    if (!lv.is_scalar())
      throw ShapeError("backward requires a scalar loss, got shape " +
                       shape_str(lv.shape));
    for (size_t i = 0; i <= static_cast<size_t>(loss.id); ++i) {
      Node& n = nodes_[i];
      if (!n.live || n.bound) continue;
      n.gradbuf.assign(n.value.data.size(), Real(0));
    }
    if (!nodes_[static_cast<size_t>(loss.id)].live) return;  // no parameters involved
    grad_at(loss.id)[0] = Real(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.live && n.backward) n.backward(*this);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;             // owned (empty when bound)
    Tensor* bound = nullptr;  // external parameter
    std::vector<Real> gradbuf;
    std::vector<int> parents;
    BackwardFn backward;
    bool live = false;
  };

  std::vector<Real>& grad_at(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.bound) {
      n.bound->ensure_grad();
      return n.bound->grad;
    }
    if (n.gradbuf.size() != n.value.data.size())
      n.gradbuf.assign(n.value.data.size(), Real(0));
    return n.gradbuf;
  }

  std::vector<Node> nodes_;
};

}  // namespace eegnet
