#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pfnet/geometry/normalize.hpp"
#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::data {

enum class ShapeFamily { sphere, box, cylinder, torus, plane_with_holes };

inline constexpr std::array<ShapeFamily, 5> kAllFamilies{
    ShapeFamily::sphere, ShapeFamily::box, ShapeFamily::cylinder, ShapeFamily::torus,
    ShapeFamily::plane_with_holes};

std::string_view family_name(ShapeFamily family);
ShapeFamily parse_family(std::string_view name);

// All shapes are centered on the origin before normalization.
struct SphereParams {
  double radius = 1.0;
};
// Full edge lengths along x, y, z.
struct BoxParams {
  std::array<double, 3> size{1.0, 1.0, 1.0};
};
// Closed cylinder along z.
struct CylinderParams {
  double radius = 0.5;
  double height = 1.0;
};
// Ring torus around z.
struct TorusParams {
  double major_radius = 1.0;
  double minor_radius = 0.3;
};
// Zero-thickness rectangle in the z = 0 plane with circular cut-outs.
struct PlateParams {
  double width = 2.0;
  double depth = 2.0;
  std::vector<std::array<double, 2>> hole_centers;
  double hole_radius = 0.2;
};

using ShapeParams = std::variant<SphereParams, BoxParams, CylinderParams, TorusParams, PlateParams>;

ShapeFamily family_of(const ShapeParams& params);

// Draws a random instance of a family (aspect ratios, radii, hole layout).
ShapeParams random_shape_params(ShapeFamily family, std::mt19937_64& rng);

struct SyntheticShape {
  geometry::PointCloud cloud;  // normalized
  geometry::NormalizeTransform transform;
};

// n points drawn uniformly by surface area, then normalized into [-1, 1].
SyntheticShape sample_synthetic_shape(const ShapeParams& params, std::size_t n, std::uint64_t seed);

}  // namespace pfnet::data
