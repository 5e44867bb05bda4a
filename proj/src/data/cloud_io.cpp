#include "pfnet/data/cloud_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pfnet/errors.hpp"

namespace pfnet::data {

using geometry::Point3;
using geometry::PointCloud;

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_number(std::string_view token, double& value) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(value);
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

CloudFormat parse_format(std::string_view name) {
  if (name == "xyz") return CloudFormat::xyz;
  if (name == "ply") return CloudFormat::ply;
  throw ParseError("unknown cloud format '" + std::string(name) + "' (expected xyz or ply)");
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".xyz") return CloudFormat::xyz;
  if (ext == ".ply") return CloudFormat::ply;
  throw ParseError(path.string() + ": cannot infer cloud format from extension '" + ext + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw IoError("failed to format number");
  return std::string(buf, ptr);
}

PointCloud parse_xyz(std::istream& in, const std::string& source) {
  PointCloud cloud;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 3)
      fail(source, line_no, "expected 3 coordinates, found " + std::to_string(tokens.size()));
    Point3 p;
    for (int a = 0; a < 3; ++a)
      if (!parse_number(tokens[a], p[a]))
        fail(source, line_no, "invalid coordinate '" + std::string(tokens[a]) + "'");
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud parse_ply(std::istream& in, const std::string& source, std::vector<std::string>* warnings) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  auto warn = [&](const std::string& what) {
    if (warnings) warnings->push_back(source + ":" + std::to_string(line_no) + ": " + what);
  };

  if (!next_line() || line != "ply") fail(source, line_no ? line_no : 1, "missing 'ply' magic line");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false, ended = false;
  while (next_line()) {
    const auto t = split_ws(line);
    if (t.empty()) continue;
    if (t[0] == "comment" || t[0] == "obj_info") continue;
    if (t[0] == "format") {
      if (t.size() < 2 || t[1] != "ascii") fail(source, line_no, "only ascii ply is supported");
      ascii = true;
    } else if (t[0] == "element") {
      if (t.size() != 3) fail(source, line_no, "malformed element line");
      Element e;
      e.name = std::string(t[1]);
      double count = 0;
      if (!parse_number(t[2], count) || count < 0 || count != std::floor(count))
        fail(source, line_no, "invalid element count '" + std::string(t[2]) + "'");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (t[0] == "property") {
      if (elements.empty()) fail(source, line_no, "property before any element");
      if (t.size() < 3) fail(source, line_no, "malformed property line");
      if (t[1] == "list") {
        if (elements.back().name == "vertex") fail(source, line_no, "list properties on vertices are not supported");
        elements.back().properties.push_back("<list>");
      } else {
        elements.back().properties.push_back(std::string(t[2]));
      }
    } else if (t[0] == "end_header") {
      ended = true;
      break;
    } else {
      fail(source, line_no, "unexpected header keyword '" + std::string(t[0]) + "'");
    }
  }
  if (!ended) fail(source, line_no, "header is not terminated by end_header");
  if (!ascii) fail(source, line_no, "missing format line");

  PointCloud cloud;
  bool seen_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      warn("skipping unsupported element '" + e.name + "'");
      for (std::size_t i = 0; i < e.count; ++i)
        if (!next_line()) fail(source, line_no, "unexpected end of file in element '" + e.name + "'");
      continue;
    }
    seen_vertex = true;
    int axis_col[3] = {-1, -1, -1};
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const std::string& p = e.properties[k];
      if (p == "x") axis_col[0] = static_cast<int>(k);
      else if (p == "y") axis_col[1] = static_cast<int>(k);
      else if (p == "z") axis_col[2] = static_cast<int>(k);
      else warn("ignoring vertex property '" + p + "'");
    }
    if (axis_col[0] < 0 || axis_col[1] < 0 || axis_col[2] < 0)
      fail(source, line_no, "vertex element lacks x/y/z properties");
    cloud.points.reserve(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      if (!next_line()) fail(source, line_no + 1, "unexpected end of file in vertex data");
      const auto t = split_ws(line);
      if (t.size() != e.properties.size())
        fail(source, line_no, "expected " + std::to_string(e.properties.size()) + " values, found " +
                                  std::to_string(t.size()));
      Point3 p;
      for (int a = 0; a < 3; ++a)
        if (!parse_number(t[static_cast<std::size_t>(axis_col[a])], p[a]))
          fail(source, line_no, "invalid coordinate '" + std::string(t[static_cast<std::size_t>(axis_col[a])]) + "'");
      cloud.points.push_back(p);
    }
  }
  if (!seen_vertex) fail(source, line_no, "no vertex element");
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format,
                      std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return format == CloudFormat::xyz ? parse_xyz(in, path.string())
                                    : parse_ply(in, path.string(), warnings);
}

PointCloud read_cloud(const std::filesystem::path& path) {
  return read_cloud(path, format_from_path(path));
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
  for (const Point3& p : cloud.points)
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  write_xyz(out, cloud);
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == CloudFormat::xyz) write_xyz(out, cloud);
  else write_ply(out, cloud);
  if (!out) throw IoError("failed writing " + path.string());
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_from_path(path));
}

}  // namespace pfnet::data
