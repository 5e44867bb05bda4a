#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pfnet/data/cloud_io.hpp"
#include "pfnet/data/dataset.hpp"
#include "pfnet/data/holes.hpp"
#include "pfnet/data/shapes.hpp"
#include "pfnet/errors.hpp"
#include "test_util.hpp"

using namespace pfnet;
using namespace pfnet::data;
using geometry::Point3;
using geometry::PointCloud;
using geometry::squared_distance;

namespace {

PointCloud cube_corners() {
  PointCloud c;
  for (double x : {-1.0, 1.0})
    for (double y : {-1.0, 1.0})
      for (double z : {-1.0, 1.0}) c.points.push_back({x, y, z});
  return c;
}

// partial and missing_gt hold every point of full exactly once, in order.
void check_partition(const CompletionSample& s) {
  REQUIRE(s.partial.size() + s.missing_gt.size() == s.full.size());
  std::vector<std::size_t> removed;
  for (const auto& h : s.hole_indices) removed.insert(removed.end(), h.begin(), h.end());
  std::sort(removed.begin(), removed.end());
  REQUIRE(std::adjacent_find(removed.begin(), removed.end()) == removed.end());
  std::size_t pi = 0, mi = 0;
  for (std::size_t i = 0; i < s.full.size(); ++i) {
    if (std::binary_search(removed.begin(), removed.end(), i))
      CHECK(s.missing_gt[mi++] == s.full[i]);
    else
      CHECK(s.partial[pi++] == s.full[i]);
  }
}

void tree_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), a));
  std::size_t count_b = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count_b;
  CHECK(files.size() == count_b);
  for (const auto& f : files) {
    INFO(f.string());
    CHECK(test::read_file(a / f) == test::read_file(b / f));
  }
}

}  // namespace

TEST_CASE("sphere samples lie on the sphere") {
  const auto s = sample_synthetic_shape(SphereParams{1.7}, 2048, 3);
  REQUIRE(s.cloud.size() == 2048);
  for (const auto& p : s.cloud.points) {
    const Point3 q = s.transform.invert(p);
    CHECK(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) == doctest::Approx(1.7).epsilon(1e-9));
  }
}

TEST_CASE("box samples lie on its six faces") {
  const BoxParams box{{2.0, 1.0, 0.5}};
  const auto s = sample_synthetic_shape(box, 1000, 4);
  std::array<int, 3> faces_hit{};
  for (const auto& p : s.cloud.points) {
    const Point3 q = s.transform.invert(p);
    bool on_face = false;
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(q[k]) <= box.size[k] / 2 + 1e-9);
      if (std::abs(std::abs(q[k]) - box.size[k] / 2) < 1e-9) {
        on_face = true;
        ++faces_hit[k];
      }
    }
    CHECK(on_face);
  }
  for (int k = 0; k < 3; ++k) CHECK(faces_hit[k] > 0);
}

TEST_CASE("shape sampling is deterministic and normalized") {
  std::mt19937_64 rng(5);
  for (ShapeFamily f : kAllFamilies) {
    const ShapeParams params = random_shape_params(f, rng);
    CHECK(family_of(params) == f);
    const auto a = sample_synthetic_shape(params, 500, 11);
    const auto b = sample_synthetic_shape(params, 500, 11);
    CHECK(a.cloud == b.cloud);
    CHECK_FALSE(a.cloud == sample_synthetic_shape(params, 500, 12).cloud);
    double widest = 0.0;
    for (const auto& p : a.cloud.points)
      for (double v : p) widest = std::max(widest, std::abs(v));
    CHECK(widest == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(parse_family(family_name(f)) == f);
  }
}

TEST_CASE("invalid shape parameters are rejected") {
  CHECK_THROWS_AS(sample_synthetic_shape(SphereParams{-1.0}, 100, 1), DomainError);
  CHECK_THROWS_AS(sample_synthetic_shape(TorusParams{0.5, 0.6}, 100, 1), DomainError);
  CHECK_THROWS_AS(sample_synthetic_shape(SphereParams{1.0}, 3, 1), DomainError);
  CHECK_THROWS_AS(parse_family("teapot"), ParseError);
}

TEST_CASE("hole removal splits 2048 points into 1536 and 512") {
  const auto shape = sample_synthetic_shape(SphereParams{1.0}, 2048, 1);
  const auto views = default_viewpoints();
  const auto s = generate_hole(shape.cloud, views, missing_count(2048, 0.25), 7);
  CHECK(s.partial.size() == 1536);
  CHECK(s.missing_gt.size() == 512);
  CHECK(s.viewpoints.size() == 1);
  check_partition(s);
}

TEST_CASE("hole removal examples") {
  const std::vector<Point3> view{{2.0, 1.0, 1.0}};
  const auto one = generate_hole(cube_corners(), view, 1, 0);
  REQUIRE(one.missing_gt.size() == 1);
  CHECK(one.missing_gt[0] == Point3{1, 1, 1});

  const auto most = generate_hole(cube_corners(), view, 7, 0);
  REQUIRE(most.partial.size() == 1);
  CHECK(most.partial[0] == Point3{-1, -1, -1});

  CHECK_THROWS_AS(generate_hole(cube_corners(), view, 0, 0), DomainError);
  CHECK_THROWS_AS(generate_hole(cube_corners(), view, 8, 0), DomainError);
}

TEST_CASE("removed points are the closest to the viewpoint") {
  const auto shape = sample_synthetic_shape(TorusParams{}, 1024, 2);
  const auto s = generate_hole(shape.cloud, default_viewpoints(), 300, 3);
  const Point3 v = s.viewpoints[0];
  double far_removed = 0.0, near_kept = 1e300;
  for (const auto& p : s.missing_gt.points) far_removed = std::max(far_removed, squared_distance(p, v));
  for (const auto& p : s.partial.points) near_kept = std::min(near_kept, squared_distance(p, v));
  CHECK(far_removed <= near_kept);
}

TEST_CASE("missing counts and hole splits") {
  CHECK(missing_count(2048, 0.25) == 512);
  CHECK(missing_count(2048, 0.5) == 1024);
  CHECK(missing_count(2048, 0.75) == 1536);
  CHECK_THROWS_AS(missing_count(100, 0.0), DomainError);
  CHECK_THROWS_AS(missing_count(100, 1.0), DomainError);
  CHECK(split_hole_counts(512, 2) == std::vector<std::size_t>{256, 256});
  CHECK(split_hole_counts(7, 3) == std::vector<std::size_t>{3, 2, 2});
}

TEST_CASE("multi-hole removal") {
  const auto shape = sample_synthetic_shape(BoxParams{}, 2048, 4);
  const auto views = default_viewpoints();
  const std::vector<std::size_t> per_hole{256, 256};
  const auto s = generate_multi_hole(shape.cloud, views, per_hole, 9);
  CHECK(s.partial.size() == 1536);
  CHECK(s.missing_gt.size() == 512);
  REQUIRE(s.hole_indices.size() == 2);
  CHECK(s.hole_indices[0].size() == 256);
  CHECK(s.hole_indices[1].size() == 256);
  CHECK_FALSE(s.viewpoints[0] == s.viewpoints[1]);
  check_partition(s);

  const std::vector<std::size_t> single{512};
  const auto a = generate_multi_hole(shape.cloud, views, single, 9);
  const auto b = generate_hole(shape.cloud, views, 512, 9);
  CHECK(a.partial == b.partial);
  CHECK(a.missing_gt == b.missing_gt);
}

TEST_CASE("antipodal viewpoints carve disjoint holes") {
  const auto shape = sample_synthetic_shape(SphereParams{1.0}, 1000, 5);
  const std::vector<Point3> views{{2, 0, 0}, {-2, 0, 0}};
  const std::vector<std::size_t> per_hole{100, 100};
  const auto s = generate_multi_hole(shape.cloud, views, per_hole, 1);
  for (std::size_t i : s.hole_indices[0]) CHECK(shape.cloud[i][0] > 0.0);
  for (std::size_t i : s.hole_indices[1]) CHECK(shape.cloud[i][0] < 0.0);
}

TEST_CASE("xyz and ply round trips are exact") {
  test::TempDir dir("io");
  std::mt19937_64 rng(6);
  PointCloud c = test::random_cloud(100, rng, -3.0, 3.0);
  c.points.push_back({1.0 / 3.0, -1e-310, 1e300});
  for (const char* name : {"c.xyz", "c.ply"}) {
    write_cloud(c, dir / name);
    CHECK(read_cloud(dir / name) == c);
  }
  CHECK(format_from_path("a.ply") == CloudFormat::ply);
  CHECK_THROWS_AS(format_from_path("a.obj"), ParseError);
}

TEST_CASE("malformed xyz input names the line") {
  std::istringstream in("0 0 0\n1 2\n");
  try {
    parse_xyz(in, "bad.xyz");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.rfind("bad.xyz:2:", 0) == 0);
  }
  std::istringstream nan_in("0 0 nan\n");
  CHECK_THROWS_AS(parse_xyz(nan_in, "nan.xyz"), ParseError);
}

TEST_CASE("ply with extra vertex properties keeps only coordinates") {
  std::istringstream in(
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
      "0.5 1 2 255 0 0\n-1 -2 -3 0 255 0\n");
  std::vector<std::string> warnings;
  const PointCloud c = parse_ply(in, "colored.ply", &warnings);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == Point3{0.5, 1, 2});
  CHECK(c[1] == Point3{-1, -2, -3});
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("dataset specs round trip through key=value text") {
  DatasetSpec spec;
  spec.n_points = 512;
  spec.missing_ratio = 0.5;
  spec.n_holes = 2;
  spec.categories = {ShapeFamily::torus, ShapeFamily::box};
  spec.seed = 99;
  const DatasetSpec back = DatasetSpec::from_key_values(spec.to_key_values());
  CHECK(back.to_key_values() == spec.to_key_values());

  DatasetSpec bad = spec;
  bad.missing_ratio = 1.0;
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.n_holes = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("dataset generation is reproducible byte for byte") {
  DatasetSpec spec;
  spec.n_points = 256;
  spec.shapes_per_category = 2;
  spec.n_holes = 2;
  spec.missing_ratio = 0.5;
  spec.seed = 17;
  test::TempDir a("ds_a"), b("ds_b");
  const Dataset first = generate_dataset(spec);
  write_dataset(first, a.path());
  write_dataset(generate_dataset(spec), b.path());
  tree_equal(a.path(), b.path());

  for (const auto& e : first.entries) {
    CHECK(e.sample.partial.size() == 128);
    CHECK(e.sample.missing_gt.size() == 128);
    check_partition(e.sample);
  }

  const auto train = load_split(a.path(), "train");
  auto in_memory = first.split("train");
  std::stable_sort(in_memory.begin(), in_memory.end(),
                   [](const auto& x, const auto& y) { return x.category < y.category; });
  REQUIRE(train.size() == in_memory.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(train[i].category == in_memory[i].category);
    CHECK(train[i].partial == in_memory[i].partial);
    CHECK(train[i].missing_gt == in_memory[i].missing_gt);
  }
  CHECK(first.split("train").size() + first.split("test").size() == first.entries.size());
  CHECK_THROWS_AS(load_split(a / "nowhere", "train"), IoError);
}
