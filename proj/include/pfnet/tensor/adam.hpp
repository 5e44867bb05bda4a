#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfnet/tensor/tensor.hpp"

namespace pfnet {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a fixed parameter set. The moment buffers
// are sized from the parameters on construction and checked on every step.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamOptions options = {});

  // Applies one update to every parameter and clears their gradients.
  // Throws UsageError naming each parameter whose gradient is missing.
  void step();

  std::uint64_t step_count() const { return step_count_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::span<const double> first_moment(std::size_t i) const { return first_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return second_[i]; }

 private:
  std::vector<NamedTensor> params_;
  AdamOptions options_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace pfnet
