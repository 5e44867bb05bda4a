#include "pfnet/geometry/normalize.hpp"

#include <cmath>

#include "pfnet/errors.hpp"

namespace pfnet::geometry {

Point3 NormalizeTransform::apply(const Point3& p) const {
  return {(p[0] - center[0]) / scale, (p[1] - center[1]) / scale, (p[2] - center[2]) / scale};
}

Point3 NormalizeTransform::invert(const Point3& p) const {
  return {p[0] * scale + center[0], p[1] * scale + center[1], p[2] * scale + center[2]};
}

NormalizedCloud normalize_unit_cube(const PointCloud& cloud) {
  if (cloud.size() < 2) throw DomainError("normalize: need at least two distinct points");
  if (!cloud.all_finite()) throw DomainError("normalize: cloud has non-finite coordinates");

  NormalizeTransform t;
  for (const Point3& p : cloud.points)
    for (int a = 0; a < 3; ++a) t.center[a] += p[a];
  for (double& c : t.center) c /= static_cast<double>(cloud.size());

  double extent = 0.0;
  for (const Point3& p : cloud.points)
    for (int a = 0; a < 3; ++a) extent = std::max(extent, std::abs(p[a] - t.center[a]));
  if (!(extent > 0.0)) throw DomainError("normalize: degenerate cloud (all points identical)");
  t.scale = extent;

  return {apply_transform(cloud, t), t};
}

PointCloud apply_transform(const PointCloud& cloud, const NormalizeTransform& transform) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Point3& p : cloud.points) out.points.push_back(transform.apply(p));
  return out;
}

PointCloud invert_transform(const PointCloud& cloud, const NormalizeTransform& transform) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Point3& p : cloud.points) out.points.push_back(transform.invert(p));
  return out;
}

}  // namespace pfnet::geometry
