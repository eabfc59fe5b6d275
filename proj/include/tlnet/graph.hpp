#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlnet/tensor.hpp"

namespace tlnet {

using NodeId = std::size_t;
class Graph;

// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

// Backward rule of one node. grad_inputs[i] is null when input i does not
// need a gradient; otherwise the rule accumulates (+=) into it.
using BackwardFn = std::function<void(const Tensor& grad_out, std::vector<Tensor*>& grad_inputs)>;

// Leaf gradients produced by Graph::backward.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  const Tensor* find(const Var& v) const;
  // Throws StateError when v received no gradient.
  const Tensor& operator[](const Var& v) const;
  Tensor take(const Var& v);

 private:
  std::vector<std::optional<Tensor>> grads_;
};

#ifdef NDEBUG
inline constexpr bool kDebugChecks = false;
#else
inline constexpr bool kDebugChecks = true;
#endif

// Append-only tape. Node k only references inputs with ids < k, so insertion
// order is a topological order and backward walks it in reverse exactly once.
// A graph is confined to one thread.
class Graph {
 public:
  explicit Graph(bool check_finite = kDebugChecks) : check_finite_(check_finite) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  // Appends an op node. requires_grad is inherited from the inputs; when no
  // input needs a gradient the backward rule is dropped.
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::string_view op_name(NodeId id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Reverse-mode pass from a scalar node. Consumes the tape: a second call
  // throws StateError.
  Gradients backward(const Var& loss);

 private:
  struct Node {
    std::string op;
    std::vector<NodeId> inputs;
    Tensor value;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  bool check_finite_;
  bool consumed_ = false;
};

// Test hook: negates the upstream gradient fed to every node whose op name
// matches, simulating a wrong-sign backward rule. Empty string disables.
void set_backward_fault_for_testing(std::string op);

}  // namespace tlnet
