#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pfnet/tensor/tensor.hpp"

namespace pfnet {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  bool attached() const { return graph_ != nullptr; }
  Graph& graph() const;
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

  // Scalar value; throws ShapeError when the node holds more than one value.
  double item() const;

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of operations recorded in creation order. Backward walks the tape in
// exact reverse order, so every node's inputs precede it by construction.
//
// A graph is single-use for differentiation: backward() may run once, after
// which reset_gradients() must be called before running it again.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf whose gradient is kept inside the graph (see grad()).
  Var variable(Tensor value);
  // Leaf bound to an external tensor; backward accumulates into `param.grad`.
  // The tensor must outlive the graph and must not be resized meanwhile.
  Var parameter(Tensor& param);

  // Records an operation node. `backward` is only retained when at least one
  // input requires a gradient.
  Var record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  void backward(Var loss);
  void reset_gradients();
  bool backward_done() const { return backward_done_; }

  std::size_t size() const { return nodes_.size(); }
  const std::string& op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() for a node; empty if none was produced.
  std::span<const double> grad(Var v) const;
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }

  // Gradient buffer for accumulation inside backward functions; empty span
  // when the node does not require a gradient.
  std::span<double> grad_buffer(std::size_t id);

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
    Tensor* bound = nullptr;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace pfnet
