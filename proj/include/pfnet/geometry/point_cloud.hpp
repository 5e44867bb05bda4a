#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pfnet/tensor/tensor.hpp"

namespace pfnet::geometry {

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct PointCloud {
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }

  bool all_finite() const;

  // [N x 3] row-major tensor.
  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t);
  // Rows [first, first + count) of an [R x 3] tensor.
  static PointCloud from_rows(const Tensor& t, std::size_t first, std::size_t count);

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

PointCloud gather(const PointCloud& cloud, std::span<const std::size_t> indices);
PointCloud concatenate(const PointCloud& a, const PointCloud& b);

// Stacks equally sized clouds into one [B*N x 3] tensor.
Tensor stack_clouds(std::span<const PointCloud> clouds);

}  // namespace pfnet::geometry
