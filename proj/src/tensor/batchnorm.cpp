#include "pfnet/tensor/batchnorm.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pfnet/errors.hpp"

namespace pfnet {

BatchNormStats::BatchNormStats(std::size_t channels)
    : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}

namespace ops {

Var batchnorm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode, bool update_stats) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("batchnorm: expected [B x C], got " + shape_to_string(xv.shape));
  const std::size_t rows = xv.shape[0], cols = xv.shape[1];
  if (gamma.size() != cols || beta.size() != cols || stats.running_mean.size() != cols)
    throw ShapeError("batchnorm: " + std::to_string(cols) + " channels but parameters have " +
                     std::to_string(gamma.size()));
  if (mode == Mode::train && rows < 2)
    throw ConfigError(
        "batchnorm: train mode needs a batch of at least 2 rows; use eval mode or a larger batch");

  const auto& gv = gamma.value().values;
  const auto& bv = beta.value().values;
  std::vector<double> mean(cols, 0.0), inv_std(cols, 0.0);

  if (mode == Mode::train) {
    std::vector<double> var(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) mean[c] += xv.values[r * cols + c];
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = xv.values[r * cols + c] - mean[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < cols; ++c) {
      var[c] /= static_cast<double>(rows);
      inv_std[c] = 1.0 / std::sqrt(var[c] + stats.epsilon);
    }
    if (update_stats) {
      const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
      for (std::size_t c = 0; c < cols; ++c) {
        double& rm = stats.running_mean.values[c];
        double& rv = stats.running_var.values[c];
        rm = (1.0 - stats.momentum) * rm + stats.momentum * mean[c];
        rv = (1.0 - stats.momentum) * rv + stats.momentum * var[c] * unbias;
      }
    }
  } else {
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] = stats.running_mean.values[c];
      inv_std[c] = 1.0 / std::sqrt(stats.running_var.values[c] + stats.epsilon);
    }
  }

  Tensor normalized(Shape{rows, cols});
  Tensor out(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      normalized.values[i] = (xv.values[i] - mean[c]) * inv_std[c];
      out.values[i] = gv[c] * normalized.values[i] + bv[c];
    }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool batch_stats = mode == Mode::train;
  return x.graph().record(
      "batchnorm", {x, gamma, beta}, std::move(out),
      [ix, ig, ib, rows, cols, batch_stats, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        auto dout = g.grad(self);
        const auto& gv = g.value(ig).values;
        const auto& xhat = normalized.values;
        std::vector<double> sum_dy(cols, 0.0), sum_dy_xhat(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            sum_dy[c] += dout[i];
            sum_dy_xhat[c] += dout[i] * xhat[i];
          }
        if (auto dg = g.grad_buffer(ig); !dg.empty())
          for (std::size_t c = 0; c < cols; ++c) dg[c] += sum_dy_xhat[c];
        if (auto db = g.grad_buffer(ib); !db.empty())
          for (std::size_t c = 0; c < cols; ++c) db[c] += sum_dy[c];
        if (auto dx = g.grad_buffer(ix); !dx.empty()) {
          const double n = static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = r * cols + c;
              if (batch_stats) {
                dx[i] += gv[c] * inv_std[c] *
                         (dout[i] - sum_dy[c] / n - xhat[i] * sum_dy_xhat[c] / n);
              } else {
                dx[i] += gv[c] * inv_std[c] * dout[i];
              }
            }
        }
      });
}

}  // namespace ops
}  // namespace pfnet
