#pragma once

#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::geometry {

// normalized = (p - center) / scale, with one isotropic scale for all axes.
struct NormalizeTransform {
  Point3 center{};
  double scale = 1.0;

  Point3 apply(const Point3& p) const;
  Point3 invert(const Point3& p) const;
};

struct NormalizedCloud {
  PointCloud cloud;
  NormalizeTransform transform;
};

// Centers on the centroid and divides by the largest absolute centered
// coordinate, so the result spans [-1, 1] on its widest axis.
NormalizedCloud normalize_unit_cube(const PointCloud& cloud);

PointCloud apply_transform(const PointCloud& cloud, const NormalizeTransform& transform);
PointCloud invert_transform(const PointCloud& cloud, const NormalizeTransform& transform);

}  // namespace pfnet::geometry
