#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::geometry {

// Per query point: minimum squared distance into the target and the lowest
// target index attaining it.
struct NearestResult {
  std::vector<double> sq_dist;
  std::vector<std::size_t> index;
};

NearestResult nearest_brute_force(const PointCloud& query, const PointCloud& target);

// Uniform grid over a fixed target cloud. Queries expand cubic shells of cells
// around the query's cell until no unvisited cell can hold a closer point, so
// results are identical (values and tie-broken indices) to brute force.
class UniformGrid {
 public:
  explicit UniformGrid(const PointCloud& target, double points_per_cell = 2.0);

  NearestResult query(const PointCloud& query) const;
  void query_point(const Point3& q, double& best, std::size_t& best_index) const;

  std::array<std::size_t, 3> dims() const { return dims_; }

 private:
  std::size_t cell_of(std::size_t x, std::size_t y, std::size_t z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }
  std::size_t axis_cell(const Point3& p, int axis) const;

  const PointCloud* target_;
  Point3 origin_{};
  double cell_size_ = 1.0;
  double margin_ = 0.0;
  std::array<std::size_t, 3> dims_{1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

// Below this target size, nearest() uses brute force.
inline constexpr std::size_t kGridThreshold = 128;

NearestResult nearest(const PointCloud& query, const PointCloud& target);
std::vector<double> nearest_squared(const PointCloud& query, const PointCloud& target);

}  // namespace pfnet::geometry
