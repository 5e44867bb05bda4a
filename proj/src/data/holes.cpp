#include "pfnet/data/holes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pfnet/errors.hpp"

namespace pfnet::data {

using geometry::Point3;
using geometry::PointCloud;

std::vector<Point3> default_viewpoints() {
  const double r = 2.0;
  const double s = r / std::sqrt(2.0);
  return {{r, 0.0, 0.0}, {0.0, 0.0, r}, {s, 0.0, s}, {-r, 0.0, 0.0}, {-s, s, 0.0}};
}

std::size_t missing_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw DomainError("missing ratio must lie strictly between 0 and 1, got " + std::to_string(ratio));
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

std::vector<std::size_t> split_hole_counts(std::size_t total, std::size_t holes) {
  if (holes == 0) throw DomainError("hole count must be at least 1");
  std::vector<std::size_t> counts(holes, total / holes);
  for (std::size_t h = 0; h < total % holes; ++h) ++counts[h];
  return counts;
}

CompletionSample generate_hole(const PointCloud& full, std::span<const Point3> candidate_viewpoints,
                               std::size_t count, std::uint64_t seed) {
  const std::size_t per_hole[] = {count};
  return generate_multi_hole(full, candidate_viewpoints, per_hole, seed);
}

CompletionSample generate_multi_hole(const PointCloud& full,
                                     std::span<const Point3> candidate_viewpoints,
                                     std::span<const std::size_t> per_hole, std::uint64_t seed) {
  const std::size_t n = full.size();
  if (candidate_viewpoints.empty()) throw DomainError("hole generation needs at least one viewpoint");
  if (per_hole.empty()) throw DomainError("hole generation needs at least one hole");
  if (per_hole.size() > candidate_viewpoints.size())
    throw DomainError("cannot place " + std::to_string(per_hole.size()) + " holes at distinct viewpoints; only " +
                      std::to_string(candidate_viewpoints.size()) + " candidates");
  const std::size_t total = std::accumulate(per_hole.begin(), per_hole.end(), std::size_t{0});
  if (total == 0 || total >= n)
    throw DomainError("cannot remove " + std::to_string(total) + " of " + std::to_string(n) +
                      " points; need 1 <= count < N");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> available(candidate_viewpoints.size());
  std::iota(available.begin(), available.end(), std::size_t{0});

  CompletionSample sample;
  sample.full = full;
  std::vector<char> removed(n, 0);
  std::size_t remaining = n;

  for (std::size_t count : per_hole) {
    if (count == 0 || count >= remaining)
      throw DomainError("hole of " + std::to_string(count) + " points does not fit the " +
                        std::to_string(remaining) + " remaining points");
    const std::size_t pick =
        std::uniform_int_distribution<std::size_t>(0, available.size() - 1)(rng);
    const Point3 view = candidate_viewpoints[available[pick]];
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(pick));
    sample.viewpoints.push_back(view);

    std::vector<std::size_t> order;
    order.reserve(remaining);
    for (std::size_t i = 0; i < n; ++i)
      if (!removed[i]) order.push_back(i);
    std::vector<double> dist(n);
    for (std::size_t i : order) dist[i] = geometry::squared_distance(full[i], view);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                      });
    order.resize(count);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) removed[i] = 1;
    remaining -= count;
    sample.hole_indices.push_back(std::move(order));
  }

  for (std::size_t i = 0; i < n; ++i) (removed[i] ? sample.missing_gt : sample.partial).points.push_back(full[i]);
  return sample;
}

}  // namespace pfnet::data
