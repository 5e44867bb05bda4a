#pragma once

#include <cstddef>

#include "pfnet/tensor/graph.hpp"
#include "pfnet/tensor/tensor.hpp"

namespace pfnet {

enum class Mode { train, eval };

struct BatchNormStats {
  explicit BatchNormStats(std::size_t channels);

  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

namespace ops {

// Per-channel normalization of x [B x C] followed by scale and shift.
//
// Train mode normalizes with the (biased) batch statistics and, when
// `update_stats` is set, folds them into the running statistics with an
// exponential moving average (unbiased variance, like most frameworks).
// Eval mode normalizes with the running statistics.
Var batchnorm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode,
              bool update_stats = true);

}  // namespace ops
}  // namespace pfnet
