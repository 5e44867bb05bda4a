#include "pfnet/data/shapes.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pfnet/errors.hpp"

namespace pfnet::data {

using geometry::Point3;
using geometry::PointCloud;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive and finite");
}

bool in_any_hole(const PlateParams& p, double x, double y) {
  for (const auto& c : p.hole_centers) {
    const double dx = x - c[0], dy = y - c[1];
    if (dx * dx + dy * dy < p.hole_radius * p.hole_radius) return true;
  }
  return false;
}

void validate(const ShapeParams& params) {
  std::visit(overloaded{
                 [](const SphereParams& s) { require_positive(s.radius, "sphere radius"); },
                 [](const BoxParams& b) {
                   for (double e : b.size) require_positive(e, "box edge length");
                 },
                 [](const CylinderParams& c) {
                   require_positive(c.radius, "cylinder radius");
                   require_positive(c.height, "cylinder height");
                 },
                 [](const TorusParams& t) {
                   require_positive(t.minor_radius, "torus minor radius");
                   require_positive(t.major_radius, "torus major radius");
                   if (t.minor_radius >= t.major_radius)
                     throw DomainError("torus minor radius must be smaller than the major radius");
                 },
                 [](const PlateParams& p) {
                   require_positive(p.width, "plate width");
                   require_positive(p.depth, "plate depth");
                   require_positive(p.hole_radius, "plate hole radius");
                   // Holes must lie inside the plate and leave most of it intact.
                   double hole_area = 0.0;
                   for (const auto& c : p.hole_centers) {
                     if (std::abs(c[0]) + p.hole_radius > p.width / 2 ||
                         std::abs(c[1]) + p.hole_radius > p.depth / 2)
                       throw DomainError("plate hole extends past the plate boundary");
                     hole_area += std::numbers::pi * p.hole_radius * p.hole_radius;
                   }
                   if (hole_area > 0.75 * p.width * p.depth)
                     throw DomainError("plate holes cover too much of the plate");
                 },
             },
             params);
}

Point3 sample_sphere(const SphereParams& s, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    const double x = normal(rng), y = normal(rng), z = normal(rng);
    const double len = std::sqrt(x * x + y * y + z * z);
    if (len > 1e-12) return {s.radius * x / len, s.radius * y / len, s.radius * z / len};
  }
}

Point3 sample_box(const BoxParams& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double ax = b.size[1] * b.size[2], ay = b.size[0] * b.size[2], az = b.size[0] * b.size[1];
  const double pick = unit(rng) * (ax + ay + az);
  const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  Point3 p;
  for (int a = 0; a < 3; ++a) p[a] = (unit(rng) - 0.5) * b.size[a];
  p[axis] = (unit(rng) < 0.5 ? -0.5 : 0.5) * b.size[axis];
  return p;
}

Point3 sample_cylinder(const CylinderParams& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lateral = kTwoPi * c.radius * c.height;
  const double cap = std::numbers::pi * c.radius * c.radius;
  const double pick = unit(rng) * (lateral + 2.0 * cap);
  const double theta = kTwoPi * unit(rng);
  if (pick < lateral) {
    return {c.radius * std::cos(theta), c.radius * std::sin(theta), (unit(rng) - 0.5) * c.height};
  }
  const double r = c.radius * std::sqrt(unit(rng));
  const double z = pick < lateral + cap ? -0.5 * c.height : 0.5 * c.height;
  return {r * std::cos(theta), r * std::sin(theta), z};
}

Point3 sample_torus(const TorusParams& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double big = t.major_radius, small = t.minor_radius;
  for (;;) {
    const double u = kTwoPi * unit(rng), v = kTwoPi * unit(rng);
    // Area element is proportional to (R + r cos v).
    if (unit(rng) * (big + small) <= big + small * std::cos(v)) {
      const double ring = big + small * std::cos(v);
      return {ring * std::cos(u), ring * std::sin(u), small * std::sin(v)};
    }
  }
}

Point3 sample_plate(const PlateParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const double x = (unit(rng) - 0.5) * p.width, y = (unit(rng) - 0.5) * p.depth;
    if (!in_any_hole(p, x, y)) return {x, y, 0.0};
  }
}

}  // namespace

std::string_view family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::sphere: return "sphere";
    case ShapeFamily::box: return "box";
    case ShapeFamily::cylinder: return "cylinder";
    case ShapeFamily::torus: return "torus";
    case ShapeFamily::plane_with_holes: return "plane_with_holes";
  }
  return "unknown";
}

ShapeFamily parse_family(std::string_view name) {
  for (ShapeFamily f : kAllFamilies)
    if (family_name(f) == name) return f;
  throw ParseError("unknown shape family '" + std::string(name) + "'");
}

ShapeFamily family_of(const ShapeParams& params) {
  return std::visit(overloaded{
                        [](const SphereParams&) { return ShapeFamily::sphere; },
                        [](const BoxParams&) { return ShapeFamily::box; },
                        [](const CylinderParams&) { return ShapeFamily::cylinder; },
                        [](const TorusParams&) { return ShapeFamily::torus; },
                        [](const PlateParams&) { return ShapeFamily::plane_with_holes; },
                    },
                    params);
}

ShapeParams random_shape_params(ShapeFamily family, std::mt19937_64& rng) {
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  switch (family) {
    case ShapeFamily::sphere:
      return SphereParams{uniform(0.5, 2.0)};
    case ShapeFamily::box:
      return BoxParams{{uniform(0.4, 2.0), uniform(0.4, 2.0), uniform(0.4, 2.0)}};
    case ShapeFamily::cylinder:
      return CylinderParams{uniform(0.3, 1.0), uniform(0.5, 2.5)};
    case ShapeFamily::torus: {
      const double major = uniform(0.6, 1.2);
      return TorusParams{major, major * uniform(0.15, 0.45)};
    }
    case ShapeFamily::plane_with_holes: {
      PlateParams p;
      p.width = uniform(1.5, 2.5);
      p.depth = uniform(1.5, 2.5);
      p.hole_radius = uniform(0.12, 0.3);
      const auto holes = std::uniform_int_distribution<int>(1, 3)(rng);
      for (int h = 0; h < holes; ++h) {
        const double hx = p.width / 2 - p.hole_radius, hy = p.depth / 2 - p.hole_radius;
        p.hole_centers.push_back({uniform(-hx, hx), uniform(-hy, hy)});
      }
      return p;
    }
  }
  throw DomainError("unknown shape family");
}

SyntheticShape sample_synthetic_shape(const ShapeParams& params, std::size_t n, std::uint64_t seed) {
  if (n < 4) throw DomainError("synthetic shapes need at least 4 points, got " + std::to_string(n));
  validate(params);
  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.push_back(std::visit(overloaded{
                                          [&](const SphereParams& s) { return sample_sphere(s, rng); },
                                          [&](const BoxParams& b) { return sample_box(b, rng); },
                                          [&](const CylinderParams& c) { return sample_cylinder(c, rng); },
                                          [&](const TorusParams& t) { return sample_torus(t, rng); },
                                          [&](const PlateParams& p) { return sample_plate(p, rng); },
                                      },
                                      params));
  }
  auto normalized = geometry::normalize_unit_cube(cloud);
  return {std::move(normalized.cloud), normalized.transform};
}

}  // namespace pfnet::data
