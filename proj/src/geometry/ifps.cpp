#include "pfnet/geometry/ifps.hpp"

#include <limits>
#include <random>
#include <string>

#include "pfnet/errors.hpp"

namespace pfnet::geometry {

namespace {

std::size_t start_index(const PointCloud& cloud, IfpsStart start, std::uint64_t seed) {
  switch (start) {
    case IfpsStart::first_index:
      return 0;
    case IfpsStart::seeded: {
      std::mt19937_64 rng(seed);
      return std::uniform_int_distribution<std::size_t>(0, cloud.size() - 1)(rng);
    }
    case IfpsStart::extremal: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < cloud.size(); ++i)
        if (cloud[i] > cloud[best]) best = i;
      return best;
    }
  }
  return 0;
}

}  // namespace

SampleIndexSet ifps(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
  return ifps(cloud, m, IfpsStart::seeded, seed);
}

SampleIndexSet ifps(const PointCloud& cloud, std::size_t m, IfpsStart start, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (m == 0 || m > n)
    throw DomainError("ifps: cannot select " + std::to_string(m) + " of " + std::to_string(n) +
                      " points");

  SampleIndexSet result;
  result.seed = seed;
  result.start = start;
  result.indices.reserve(m);

  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> selected(n, 0);
  std::size_t current = start_index(cloud, start, seed);

  for (std::size_t step = 0; step < m; ++step) {
    result.indices.push_back(current);
    selected[current] = 1;
    if (step + 1 == m) break;

    const Point3& c = cloud[current];
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      const double d = squared_distance(cloud[i], c);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return result;
}

PointCloud ifps_points(const PointCloud& cloud, std::size_t m, IfpsStart start, std::uint64_t seed) {
  return gather(cloud, ifps(cloud, m, start, seed).indices);
}

}  // namespace pfnet::geometry
