#include "pfnet/tensor/graph.hpp"

#include <algorithm>
#include <utility>

#include "pfnet/errors.hpp"

namespace pfnet {

Graph& Var::graph() const {
  if (!graph_) throw UsageError("variable is detached from any graph");
  return *graph_;
}

const Tensor& Var::value() const { return graph().value(id_); }

bool Var::requires_grad() const { return graph().requires_grad(id_); }

double Var::item() const {
  const Tensor& t = value();
  if (t.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_to_string(t.shape));
  return t.values[0];
}

void Graph::check_owned(Var v, const char* what) const {
  if (!v.attached()) throw UsageError(std::string(what) + ": variable is detached from any graph");
  if (v.graph_ != this || v.id_ >= nodes_.size())
    throw UsageError(std::string(what) + ": variable belongs to a different graph");
}

Var Graph::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  node.value.requires_grad = false;
  node.value.grad.reset();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  Node node;
  node.op = "variable";
  node.value = std::move(value);
  node.value.requires_grad = true;
  node.value.grad.reset();
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Tensor& param) {
  Node node;
  node.op = "parameter";
  node.value = Tensor(param.shape, param.values);
  node.requires_grad = true;
  node.bound = &param;
  param.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node node;
  node.op = std::move(op);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in, node.op.c_str());
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<const double> Graph::grad(Var v) const {
  check_owned(v, "grad");
  return nodes_[v.id_].grad;
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Graph::backward(Var loss) {
  check_owned(loss, "backward");
  if (backward_done_)
    throw UsageError("backward called twice on the same graph without reset_gradients()");
  if (nodes_[loss.id_].value.size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_to_string(nodes_[loss.id_].value.shape));
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;

  grad_buffer(loss.id_)[0] = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, id);
  }
  for (Node& node : nodes_) {
    if (node.bound && !node.grad.empty()) node.bound->accumulate_grad(node.grad);
  }
}

void Graph::reset_gradients() {
  for (Node& node : nodes_) node.grad.clear();
  backward_done_ = false;
}

}  // namespace pfnet
