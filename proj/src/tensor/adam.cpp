#include "pfnet/tensor/adam.hpp"

#include <cmath>

#include "pfnet/errors.hpp"

namespace pfnet {

Adam::Adam(std::vector<NamedTensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(options_.beta1 > 0.0 && options_.beta1 < 1.0) || !(options_.beta2 > 0.0 && options_.beta2 < 1.0))
    throw ConfigError("adam: betas must lie in (0, 1)");
  if (!(options_.epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  for (const NamedTensor& p : params_) {
    first_.emplace_back(p.tensor->size(), 0.0);
    second_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step() {
  std::string missing;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& t = *params_[i].tensor;
    if (t.size() != first_[i].size())
      throw ShapeError("adam: parameter " + params_[i].name + " changed size since construction");
    if (!t.grad || t.grad->size() != t.size()) missing += (missing.empty() ? "" : ", ") + params_[i].name;
  }
  if (!missing.empty()) throw UsageError("adam: missing gradients for " + missing);

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& param = *params_[i].tensor;
    const auto& grad = *param.grad;
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < param.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      param.values[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
    param.clear_grad();
  }
}

}  // namespace pfnet
