#include "pfnet/geometry/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pfnet/errors.hpp"

namespace pfnet::geometry {

bool PointCloud::all_finite() const {
  return std::all_of(points.begin(), points.end(), [](const Point3& p) {
    return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
  });
}

Tensor PointCloud::to_tensor() const {
  if (points.empty()) throw DomainError("cannot convert an empty point cloud to a tensor");
  std::vector<double> values;
  values.reserve(points.size() * 3);
  for (const Point3& p : points) values.insert(values.end(), p.begin(), p.end());
  return Tensor(Shape{points.size(), 3}, std::move(values));
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.shape[1] != 3)
    throw ShapeError("point cloud tensor must be [N x 3], got " + shape_to_string(t.shape));
  return from_rows(t, 0, t.shape[0]);
}

PointCloud PointCloud::from_rows(const Tensor& t, std::size_t first, std::size_t count) {
  if (t.cols() != 3 || first + count > t.rows())
    throw ShapeError("cannot take rows [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") of " + shape_to_string(t.shape) +
                     " as points");
  PointCloud cloud;
  cloud.points.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t c = 0; c < 3; ++c) cloud.points[i][c] = t.values[(first + i) * 3 + c];
  return cloud;
}

PointCloud gather(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= cloud.size()) throw DomainError("gather index " + std::to_string(i) + " out of range");
    out.points.push_back(cloud.points[i]);
  }
  return out;
}

PointCloud concatenate(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  return out;
}

Tensor stack_clouds(std::span<const PointCloud> clouds) {
  if (clouds.empty()) throw DomainError("stack_clouds: no clouds");
  const std::size_t n = clouds.front().size();
  std::vector<double> values;
  values.reserve(clouds.size() * n * 3);
  for (const PointCloud& c : clouds) {
    if (c.size() != n)
      throw ShapeError("stack_clouds: clouds of " + std::to_string(n) + " and " +
                       std::to_string(c.size()) + " points cannot share a batch");
    for (const Point3& p : c.points) values.insert(values.end(), p.begin(), p.end());
  }
  return Tensor(Shape{clouds.size() * n, 3}, std::move(values));
}

}  // namespace pfnet::geometry
