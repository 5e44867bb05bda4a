#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pfnet/geometry/ifps.hpp"
#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::diagnostics {

// Textbook farthest point sampling: every step rescans all selected points,
// O(N * m^2). Same start and tie rules as geometry::ifps.
geometry::SampleIndexSet ifps_reference(const geometry::PointCloud& cloud, std::size_t m,
                                        std::size_t first);

struct BenchRow {
  std::string kernel;  // "ifps" or "chamfer"
  std::size_t n_points = 0;
  double reference_ms = 0.0;    // brute force
  double accelerated_ms = 0.0;  // cached IFPS / grid nearest neighbour
  bool exact = false;           // identical indices and bit-identical distances
};

// IFPS (m = min(n, 256)) and Chamfer on random clouds at each size.
std::vector<BenchRow> run_bench(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                std::size_t repeats = 3);

std::string format_bench(const std::vector<BenchRow>& rows);

}  // namespace pfnet::diagnostics
