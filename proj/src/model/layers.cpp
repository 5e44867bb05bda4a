#include "pfnet/model/layers.hpp"

#include <cmath>

#include "pfnet/tensor/ops.hpp"

namespace pfnet::model {

Var bind(Graph& g, Tensor& t, Binding binding) {
  return binding == Binding::trainable ? g.parameter(t) : g.constant(Tensor(t.shape, t.values));
}

Linear::Linear(std::size_t in, std::size_t out) : weight(Shape{in, out}), bias(Shape{out}) {}

void Linear::initialize(std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(weight.shape[0]));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : weight.values) w = dist(rng);
  for (double& b : bias.values) b = dist(rng);
}

Var Linear::forward(Graph& g, Var x, Binding binding) {
  return ops::linear(x, bind(g, weight, binding), bind(g, bias, binding));
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Shape{channels}, 1.0), beta(Shape{channels}, 0.0), stats(channels) {}

Var BatchNorm::forward(Graph& g, Var x, Mode mode, Binding binding) {
  return ops::batchnorm(x, bind(g, gamma, binding), bind(g, beta, binding), stats, mode,
                        binding == Binding::trainable);
}

void BatchNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

void BatchNorm::visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".running_mean", stats.running_mean);
  fn(prefix + ".running_var", stats.running_var);
}

}  // namespace pfnet::model
