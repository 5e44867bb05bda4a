#include "pfnet/geometry/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfnet/errors.hpp"

namespace pfnet::geometry {

namespace {

void require_nonempty(const PointCloud& query, const PointCloud& target) {
  if (query.empty() || target.empty())
    throw DomainError("nearest-neighbor query needs non-empty query and target clouds");
}

constexpr std::size_t kMaxCellsPerPoint = 4;

}  // namespace

NearestResult nearest_brute_force(const PointCloud& query, const PointCloud& target) {
  require_nonempty(query, target);
  NearestResult r;
  r.sq_dist.resize(query.size());
  r.index.resize(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double d = squared_distance(query[i], target[j]);
      if (d < best) {
        best = d;
        best_index = j;
      }
    }
    r.sq_dist[i] = best;
    r.index[i] = best_index;
  }
  return r;
}

UniformGrid::UniformGrid(const PointCloud& target, double points_per_cell) : target_(&target) {
  if (target.empty()) throw DomainError("cannot build a grid over an empty cloud");
  Point3 lo = target[0], hi = target[0];
  for (const Point3& p : target.points)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  origin_ = lo;
  const double max_extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});

  if (max_extent > 0.0) {
    // Size cells over the non-degenerate axes only, so planar and linear
    // clouds still get a useful resolution.
    double volume = 1.0;
    int live_axes = 0;
    for (int a = 0; a < 3; ++a) {
      const double e = hi[a] - lo[a];
      if (e > 1e-9 * max_extent) {
        volume *= e;
        ++live_axes;
      }
    }
    const double cells_wanted = std::max(1.0, static_cast<double>(target.size()) / points_per_cell);
    cell_size_ = std::pow(volume / cells_wanted, 1.0 / live_axes);
    std::size_t total = 1;
    for (int a = 0; a < 3; ++a) {
      dims_[a] = static_cast<std::size_t>(std::floor((hi[a] - lo[a]) / cell_size_)) + 1;
      total *= dims_[a];
    }
    if (total > kMaxCellsPerPoint * target.size() + 8) {
      const double shrink = std::cbrt(static_cast<double>(total) /
                                      static_cast<double>(kMaxCellsPerPoint * target.size()));
      cell_size_ *= shrink;
      for (int a = 0; a < 3; ++a)
        dims_[a] = static_cast<std::size_t>(std::floor((hi[a] - lo[a]) / cell_size_)) + 1;
    }
  }
  // Shrinks shell lower bounds to absorb rounding in cell assignment.
  margin_ = 1e-9 * (1.0 + max_extent + std::abs(origin_[0]) + std::abs(origin_[1]) + std::abs(origin_[2]));

  const std::size_t n_cells = dims_[0] * dims_[1] * dims_[2];
  std::vector<std::size_t> cell(target.size());
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Point3& p = target[i];
    cell[i] = cell_of(axis_cell(p, 0), axis_cell(p, 1), axis_cell(p, 2));
    ++cell_start_[cell[i] + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] += cell_start_[c];
  order_.resize(target.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < target.size(); ++i) order_[fill[cell[i]]++] = i;
}

std::size_t UniformGrid::axis_cell(const Point3& p, int axis) const {
  const double t = std::floor((p[axis] - origin_[axis]) / cell_size_);
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(t), dims_[axis] - 1);
}

void UniformGrid::query_point(const Point3& q, double& best, std::size_t& best_index) const {
  const PointCloud& target = *target_;
  best = std::numeric_limits<double>::infinity();
  best_index = target.size();
  const std::array<std::size_t, 3> c{axis_cell(q, 0), axis_cell(q, 1), axis_cell(q, 2)};
  const std::size_t max_ring = std::max({dims_[0], dims_[1], dims_[2]});

  auto visit = [&](std::size_t x, std::size_t y, std::size_t z) {
    const std::size_t id = cell_of(x, y, z);
    for (std::size_t k = cell_start_[id]; k < cell_start_[id + 1]; ++k) {
      const std::size_t j = order_[k];
      const double d = squared_distance(q, target[j]);
      if (d < best || (d == best && j < best_index)) {
        best = d;
        best_index = j;
      }
    }
  };

  for (std::size_t r = 0; r <= max_ring; ++r) {
    std::array<std::size_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = c[a] >= r ? c[a] - r : 0;
      hi[a] = std::min(c[a] + r, dims_[a] - 1);
    }
    for (std::size_t z = lo[2]; z <= hi[2]; ++z)
      for (std::size_t y = lo[1]; y <= hi[1]; ++y)
        for (std::size_t x = lo[0]; x <= hi[0]; ++x) {
          const std::size_t ring = std::max({x > c[0] ? x - c[0] : c[0] - x,
                                             y > c[1] ? y - c[1] : c[1] - y,
                                             z > c[2] ? z - c[2] : c[2] - z});
          if (ring == r) visit(x, y, z);
        }

    // Smallest distance from q to any cell outside the visited block.
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (c[a] >= r + 1) {
        const double face = origin_[a] + static_cast<double>(c[a] - r) * cell_size_;
        bound = std::min(bound, q[a] - face);
      }
      if (c[a] + r + 1 < dims_[a]) {
        const double face = origin_[a] + static_cast<double>(c[a] + r + 1) * cell_size_;
        bound = std::min(bound, face - q[a]);
      }
    }
    if (std::isinf(bound)) return;  // whole grid visited
    bound = std::max(0.0, bound - margin_);
    if (best < bound * bound) return;
  }
}

NearestResult UniformGrid::query(const PointCloud& query) const {
  if (query.empty()) throw DomainError("nearest-neighbor query needs a non-empty query cloud");
  NearestResult r;
  r.sq_dist.resize(query.size());
  r.index.resize(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) query_point(query[i], r.sq_dist[i], r.index[i]);
  return r;
}

NearestResult nearest(const PointCloud& query, const PointCloud& target) {
  require_nonempty(query, target);
  if (target.size() < kGridThreshold) return nearest_brute_force(query, target);
  return UniformGrid(target).query(query);
}

std::vector<double> nearest_squared(const PointCloud& query, const PointCloud& target) {
  return nearest(query, target).sq_dist;
}

}  // namespace pfnet::geometry
