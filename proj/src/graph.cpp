#include "tlnet/graph.hpp"

#include <mutex>

#include "tlnet/error.hpp"

namespace tlnet {

namespace {

std::mutex g_fault_mutex;
std::string g_fault_op;

std::string current_fault() {
  std::lock_guard lock(g_fault_mutex);
  return g_fault_op;
}

}  // namespace

void set_backward_fault_for_testing(std::string op) {
  std::lock_guard lock(g_fault_mutex);
  g_fault_op = std::move(op);
}

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

const Tensor* Gradients::find(const Var& v) const {
  if (v.id() >= grads_.size() || !grads_[v.id()]) return nullptr;
  return &*grads_[v.id()];
}

const Tensor& Gradients::operator[](const Var& v) const {
  const Tensor* g = find(v);
  if (!g) throw StateError("no gradient recorded for node " + std::to_string(v.id()));
  return *g;
}

Tensor Gradients::take(const Var& v) {
  if (v.id() >= grads_.size() || !grads_[v.id()]) {
    throw StateError("no gradient recorded for node " + std::to_string(v.id()));
  }
  Tensor t = std::move(*grads_[v.id()]);
  grads_[v.id()].reset();
  return t;
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (consumed_) throw StateError("graph already consumed by backward()");
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
                  BackwardFn fn) {
  if (consumed_) throw StateError("graph already consumed by backward()");
  if (check_finite_ && !value.all_finite()) {
    throw NumericError("non-finite output from op '" + std::string(op) + "'");
  }
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.graph() != this) throw StateError("op '" + n.op + "' mixes vars from two graphs");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(const Var& loss) {
  if (consumed_) throw StateError("backward() called twice on the same graph");
  if (&loss.graph() != this) throw StateError("loss belongs to another graph");
  if (loss.value().size() != 1) {
    throw ValidationError("backward() needs a scalar loss, got shape " +
                          shape_str(loss.shape()));
  }
  consumed_ = true;

  const std::string fault = current_fault();
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id()] = Tensor::full(loss.shape(), 1.0);

  std::vector<Tensor*> slots;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!grads[id] || !node.requires_grad || node.is_leaf) continue;

    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const NodeId in = node.inputs[i];
      if (!nodes_[in].requires_grad) continue;
      if (!grads[in]) grads[in] = Tensor::zeros(nodes_[in].value.shape());
      slots[i] = &*grads[in];
    }
    if (!fault.empty() && fault == node.op) *grads[id] *= -1.0;
    node.backward(*grads[id], slots);
    if (check_finite_) {
      for (Tensor* s : slots) {
        if (s && !s->all_finite()) {
          throw NumericError("non-finite gradient from op '" + node.op + "'");
        }
      }
    }
    grads[id].reset();
  }

  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].is_leaf || !nodes_[id].requires_grad) grads[id].reset();
    else if (!grads[id]) grads[id] = Tensor::zeros(nodes_[id].value.shape());
  }
  return Gradients(std::move(grads));
}

}  // namespace tlnet
