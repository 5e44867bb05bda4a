#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>

#include "pfnet/tensor/batchnorm.hpp"
#include "pfnet/tensor/graph.hpp"
#include "pfnet/tensor/tensor.hpp"

namespace pfnet::model {

// How a module's tensors enter a graph. Frozen modules contribute constants
// (no gradients) and leave batchnorm running statistics untouched.
enum class Binding { trainable, frozen };

Var bind(Graph& g, Tensor& t, Binding binding);

using ParamVisitor = std::function<void(const std::string& name, Tensor& tensor)>;

// Affine map shared across rows: x [R x in] -> [R x out].
struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out);

  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  // Uniform in +-sqrt(1 / fan_in) for weights and biases.
  void initialize(std::mt19937_64& rng);
  Var forward(Graph& g, Var x, Binding binding);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct BatchNorm {
  BatchNorm() : stats(1) {}
  explicit BatchNorm(std::size_t channels);

  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;

  Var forward(Graph& g, Var x, Mode mode, Binding binding);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace pfnet::model
