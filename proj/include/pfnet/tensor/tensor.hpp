#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pfnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles with an optional gradient slot.
//
// An empty shape denotes a scalar (one element). Dimension sizes are always
// positive and `values.size() == shape_numel(shape)`.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor();
  explicit Tensor(Shape shape_, double fill = 0.0);
  Tensor(Shape shape_, std::vector<double> values_);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const;

  // Row count and column count for a tensor viewed as a matrix whose last
  // axis is the column axis.
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t row, std::size_t col) { return values[row * cols() + col]; }
  double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }

  std::span<double> data() { return values; }
  std::span<const double> data() const { return values; }

  // Adds `delta` into the gradient slot, allocating it on first use.
  void accumulate_grad(std::span<const double> delta);
  void zero_grad();
  void clear_grad() { grad.reset(); }

  bool all_finite() const;
};

}  // namespace pfnet
