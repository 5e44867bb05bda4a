#include "pfnet/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pfnet/errors.hpp"

namespace pfnet {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_dims(const Shape& shape) {
  if (std::find(shape.begin(), shape.end(), std::size_t{0}) != shape.end())
    throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
}

}  // namespace

Tensor::Tensor() : values(1, 0.0) {}

Tensor::Tensor(Shape shape_, double fill) : shape(std::move(shape_)) {
  check_dims(shape);
  values.assign(shape_numel(shape), fill);
}

Tensor::Tensor(Shape shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  check_dims(shape);
  if (values.size() != shape_numel(shape))
    throw ShapeError("tensor of shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.values[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape));
  return shape[axis];
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : values.size() / shape.back(); }

std::size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

void Tensor::accumulate_grad(std::span<const double> delta) {
  if (delta.size() != values.size())
    throw ShapeError("gradient length " + std::to_string(delta.size()) + " does not match tensor " +
                     shape_to_string(shape));
  if (!grad) grad.emplace(values.size(), 0.0);
  std::transform(grad->begin(), grad->end(), delta.begin(), grad->begin(), std::plus<>{});
}

void Tensor::zero_grad() { grad.emplace(values.size(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace pfnet
