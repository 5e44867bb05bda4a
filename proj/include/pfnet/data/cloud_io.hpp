#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pfnet/geometry/point_cloud.hpp"

namespace pfnet::data {

enum class CloudFormat { xyz, ply };

CloudFormat parse_format(std::string_view name);
// By file extension (.xyz or .ply).
CloudFormat format_from_path(const std::filesystem::path& path);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// xyz: one "x y z" line per point. ply: ASCII header with a vertex element;
// only the x/y/z properties are kept. Anything else the reader skips is
// reported through `warnings` when given.
geometry::PointCloud parse_xyz(std::istream& in, const std::string& source);
geometry::PointCloud parse_ply(std::istream& in, const std::string& source,
                               std::vector<std::string>* warnings = nullptr);

geometry::PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format,
                                std::vector<std::string>* warnings = nullptr);
geometry::PointCloud read_cloud(const std::filesystem::path& path);

void write_xyz(std::ostream& out, const geometry::PointCloud& cloud);
void write_ply(std::ostream& out, const geometry::PointCloud& cloud);
void write_cloud(const geometry::PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void write_cloud(const geometry::PointCloud& cloud, const std::filesystem::path& path);

}  // namespace pfnet::data
