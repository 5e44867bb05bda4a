#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pfnet/tensor/graph.hpp"
#include "pfnet/tensor/tensor.hpp"

namespace pfnet {

// Plain (non-recording) row-major matrix product; out = op(a) * op(b).
// Backed by BLAS dgemm.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> out,
          double beta = 0.0);

Tensor matmul_values(const Tensor& a, const Tensor& b);

namespace ops {

// [p x q] * [q x r] -> [p x r]
Var matmul(Var a, Var b);
// x [R x in] * weight [in x out] + bias [out] -> [R x out]
Var linear(Var x, Var weight, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Adds a per-column vector [C] to every row of x [R x C].
Var add_rowwise(Var x, Var row);

Var relu(Var x);
Var sigmoid(Var x);
Var log(Var x);
// Clamps into [lo, hi]; the gradient is zero where clamping happened.
// `clamped_count`, when given, is incremented by the number of clamped values.
Var clamp(Var x, double lo, double hi, std::size_t* clamped_count = nullptr);

Var sum(Var x);
Var mean(Var x);

Var reshape(Var x, Shape shape);

// Per-channel maximum over the point (row) axis: [P x C] -> [C].
// The gradient goes to the first row attaining the maximum.
Var maxpool_points(Var x);
// Same over `groups` consecutive equal-size row blocks: [G*P x C] -> [G x C].
Var maxpool_groups(Var x, std::size_t groups);

// Concatenates matrices with equal row counts along the column axis.
Var concat_cols(const std::vector<Var>& parts);
// Concatenates matrices with equal column counts along the row axis.
Var concat_rows(const std::vector<Var>& parts);
// Takes k tensors with equal element counts R and stacks them as the columns
// of an [R x k] matrix.
Var stack_cols(const std::vector<Var>& parts);
// Rows [begin, end) of a matrix.
Var slice_rows(Var x, std::size_t begin, std::size_t end);
// Each row of x [R x C] repeated `times` consecutively -> [R*times x C].
Var repeat_rows(Var x, std::size_t times);

// Gradient barrier: a constant leaf holding the current value of x.
Var detach(Var x);

}  // namespace ops
}  // namespace pfnet
