#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::data {

// One training/evaluation example: the partial input, the removed region and
// the full shape it came from. partial and missing_gt partition full exactly.
struct CompletionSample {
  geometry::PointCloud full;
  geometry::PointCloud partial;
  geometry::PointCloud missing_gt;
  std::vector<geometry::Point3> viewpoints;  // one per hole, in removal order
  std::string category;
  // Indices into `full`, ascending; one list per hole.
  std::vector<std::vector<std::size_t>> hole_indices;
};

// Five fixed directions scaled to radius 2 in normalized space.
std::vector<geometry::Point3> default_viewpoints();

// round(ratio * n); throws unless 0 < ratio < 1.
std::size_t missing_count(std::size_t n, double ratio);

// Splits `total` into `holes` near-equal counts; earlier holes take the remainder.
std::vector<std::size_t> split_hole_counts(std::size_t total, std::size_t holes);

// Picks one candidate viewpoint from the seed and removes the `count` points
// nearest to it (lowest index on ties). Both parts keep the original order.
CompletionSample generate_hole(const geometry::PointCloud& full,
                               std::span<const geometry::Point3> candidate_viewpoints,
                               std::size_t count, std::uint64_t seed);

// Repeats hole removal on the remaining cloud with distinct seed-chosen
// viewpoints. With a single hole this is exactly generate_hole.
CompletionSample generate_multi_hole(const geometry::PointCloud& full,
                                     std::span<const geometry::Point3> candidate_viewpoints,
                                     std::span<const std::size_t> per_hole, std::uint64_t seed);

}  // namespace pfnet::data
