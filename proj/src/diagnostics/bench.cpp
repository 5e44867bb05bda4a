#include "pfnet/diagnostics/bench.hpp"

#include <chrono>
#include <cstdio>
#include <limits>
#include <random>

#include "pfnet/errors.hpp"
#include "pfnet/geometry/nearest.hpp"

namespace pfnet::diagnostics {

using geometry::PointCloud;

geometry::SampleIndexSet ifps_reference(const PointCloud& cloud, std::size_t m, std::size_t first) {
  if (m == 0 || m > cloud.size()) throw DomainError("ifps_reference: m out of range");
  geometry::SampleIndexSet out;
  out.start = geometry::IfpsStart::first_index;
  std::vector<char> taken(cloud.size(), 0);
  out.indices.push_back(first);
  taken[first] = 1;
  while (out.indices.size() < m) {
    double best = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (taken[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s : out.indices) d = std::min(d, geometry::squared_distance(cloud[i], cloud[s]));
      if (d > best) {
        best = d;
        best_index = i;
      }
    }
    out.indices.push_back(best_index);
    taken[best_index] = 1;
  }
  return out;
}

namespace {

PointCloud random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.points.resize(n);
  for (auto& p : c.points) p = {u(rng), u(rng), u(rng)};
  return c;
}

template <typename F>
double best_ms(std::size_t repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                std::size_t repeats) {
  std::mt19937_64 rng(seed);
  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    const PointCloud cloud = random_cloud(n, rng);
    const std::size_t m = std::min<std::size_t>(n, 256);
    geometry::SampleIndexSet ref, fast;
    BenchRow ifps_row{"ifps", n};
    ifps_row.reference_ms = best_ms(repeats, [&] { ref = ifps_reference(cloud, m, 0); });
    ifps_row.accelerated_ms = best_ms(
        repeats, [&] { fast = geometry::ifps(cloud, m, geometry::IfpsStart::first_index); });
    ifps_row.exact = ref.indices == fast.indices;
    rows.push_back(ifps_row);

    const PointCloud other = random_cloud(n, rng);
    geometry::NearestResult ab_ref, ba_ref, ab_fast, ba_fast;
    BenchRow chamfer_row{"chamfer", n};
    chamfer_row.reference_ms = best_ms(repeats, [&] {
      ab_ref = geometry::nearest_brute_force(cloud, other);
      ba_ref = geometry::nearest_brute_force(other, cloud);
    });
    chamfer_row.accelerated_ms = best_ms(repeats, [&] {
      ab_fast = geometry::UniformGrid(other).query(cloud);
      ba_fast = geometry::UniformGrid(cloud).query(other);
    });
    chamfer_row.exact = ab_ref.sq_dist == ab_fast.sq_dist && ab_ref.index == ab_fast.index &&
                        ba_ref.sq_dist == ba_fast.sq_dist && ba_ref.index == ba_fast.index;
    rows.push_back(chamfer_row);
  }
  return rows;
}

std::string format_bench(const std::vector<BenchRow>& rows) {
  std::string out = "kernel   n_points  brute_ms  accelerated_ms  speedup  exact\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %8zu %9.3f %15.3f %8.2f  %s\n", r.kernel.c_str(),
                  r.n_points, r.reference_ms, r.accelerated_ms,
                  r.accelerated_ms > 0 ? r.reference_ms / r.accelerated_ms : 0.0,
                  r.exact ? "yes" : "no");
    out += buf;
  }
  return out;
}

}  // namespace pfnet::diagnostics
