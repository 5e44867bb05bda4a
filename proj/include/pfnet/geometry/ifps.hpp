#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::geometry {

// How the first sample is chosen; every later sample is the point with the
// largest squared distance to the already selected set (lowest index on ties).
enum class IfpsStart {
  seeded,       // uniform over the cloud, drawn from the seed
  first_index,  // index 0
  extremal,     // lexicographically largest (x, y, z); independent of point order
};

struct SampleIndexSet {
  std::vector<std::size_t> indices;  // selection order
  std::uint64_t seed = 0;
  IfpsStart start = IfpsStart::seeded;
};

// Iterative farthest point sampling in O(N * m) using a per-point cache of the
// squared distance to the nearest selected point. Requires 1 <= m <= N.
SampleIndexSet ifps(const PointCloud& cloud, std::size_t m, std::uint64_t seed);
SampleIndexSet ifps(const PointCloud& cloud, std::size_t m, IfpsStart start, std::uint64_t seed = 0);

// Convenience: the sampled points themselves, in selection order.
PointCloud ifps_points(const PointCloud& cloud, std::size_t m, IfpsStart start, std::uint64_t seed = 0);

}  // namespace pfnet::geometry
