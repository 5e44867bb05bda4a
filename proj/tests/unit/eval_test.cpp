#include <cmath>
#include <random>

#include "doctest.h"
#include "pfnet/data/dataset.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/eval/metrics.hpp"
#include "pfnet/geometry/nearest.hpp"
#include "test_util.hpp"

using namespace pfnet;
using namespace pfnet::eval;
using geometry::Point3;
using geometry::PointCloud;

namespace {

std::vector<data::CompletionSample> samples(std::size_t per_category = 2) {
  data::DatasetSpec spec;
  spec.n_points = 128;
  spec.shapes_per_category = per_category;
  spec.train_fraction = 1.0;
  spec.seed = 21;
  return data::generate_dataset(spec).split("train");
}

// Moves every predicted point by `dx` along x.
Predictor shifted_oracle(double dx) {
  return [dx](const data::CompletionSample& s) {
    PointCloud p = s.missing_gt;
    for (auto& q : p.points) q[0] += dx;
    return p;
  };
}

PointCloud rigid(const PointCloud& c, double angle, const Point3& t) {
  PointCloud out = c;
  const double cs = std::cos(angle), sn = std::sin(angle);
  for (auto& p : out.points) {
    const double x = cs * p[0] - sn * p[1];
    const double y = sn * p[0] + cs * p[1];
    p = {x + t[0], y + t[1], p[2] + t[2]};
  }
  return out;
}

}  // namespace

TEST_CASE("directional error examples") {
  std::mt19937_64 rng(1);
  const PointCloud c = test::random_cloud(30, rng);
  const auto same = directional_errors(c, c);
  CHECK(same.pred_to_gt == 0.0);
  CHECK(same.gt_to_pred == 0.0);

  const auto e = directional_errors(PointCloud({{0, 0, 0}}), PointCloud({{0.1, 0, 0}}));
  CHECK(e.pred_to_gt == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(e.gt_to_pred == doctest::Approx(0.01).epsilon(1e-12));

  PointCloud superset = c;
  superset.points.push_back({10, 10, 10});
  const auto s = directional_errors(superset, c);
  CHECK(s.gt_to_pred == 0.0);
  CHECK(s.pred_to_gt > 0.0);
  const auto brute = geometry::nearest_brute_force(superset, c);
  double mean = 0.0;
  for (double d : brute.sq_dist) mean += d / static_cast<double>(superset.size());
  CHECK(s.pred_to_gt == doctest::Approx(mean).epsilon(1e-12));

  CHECK_THROWS_AS(directional_errors(PointCloud{}, c), DomainError);
}

TEST_CASE("oracle predictor gives an all-zero report in both modes") {
  const auto s = samples();
  for (EvalMode mode : {EvalMode::overall, EvalMode::missing}) {
    const auto r = evaluate(oracle_predictor(), s, mode);
    CHECK(r.categories.size() == 5);
    for (const auto& c : r.categories) {
      CHECK(c.pred_to_gt == 0.0);
      CHECK(c.gt_to_pred == 0.0);
    }
    CHECK(r.mean.pred_to_gt == 0.0);
    CHECK(r.mean.gt_to_pred == 0.0);
  }
}

TEST_CASE("partial points contribute nothing in overall mode") {
  for (const auto& s : samples()) {
    const auto r = geometry::nearest_brute_force(s.partial, s.full);
    for (double d : r.sq_dist) CHECK(d == 0.0);
  }
}

TEST_CASE("reported errors are scaled by 1000") {
  const auto s = samples(1);
  std::vector<data::CompletionSample> one{s.front()};
  one.front().missing_gt = PointCloud({{0, 0, 0}});
  const auto single = evaluate(shifted_oracle(0.1), one, EvalMode::missing);
  CHECK(single.mean.pred_to_gt == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(single.mean.gt_to_pred == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("the mean is unweighted across categories") {
  auto s = samples(1);
  std::vector<data::CompletionSample> picked;
  for (const auto& x : s)
    if (x.category == "sphere" || x.category == "box") picked.push_back(x);
  REQUIRE(picked.size() == 2);
  picked.push_back(picked[0].category == "sphere" ? picked[0] : picked[1]);
  picked.push_back(picked.back());
  auto predictor = [](const data::CompletionSample& x) {
    PointCloud p = x.missing_gt;
    const double dx = x.category == "sphere" ? 0.0 : 0.1;
    for (auto& q : p.points) q[0] += dx;
    return p;
  };
  const auto r = evaluate(predictor, picked, EvalMode::missing);
  REQUIRE(r.categories.size() == 2);
  CHECK(r.categories[0].category == "box");
  CHECK(r.categories[0].n_samples == 1);
  CHECK(r.categories[1].n_samples == 3);
  CHECK(r.mean.pred_to_gt ==
        doctest::Approx((r.categories[0].pred_to_gt + r.categories[1].pred_to_gt) / 2.0));
}

TEST_CASE("missing-mode errors are invariant under rigid motion") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud pred = test::random_cloud(40, rng);
    const PointCloud gt = test::random_cloud(50, rng);
    const auto a = directional_errors(pred, gt);
    const Point3 t{0.3 * trial, -1.0, 2.0};
    const auto b = directional_errors(rigid(pred, 0.7 * trial, t), rigid(gt, 0.7 * trial, t));
    CHECK(std::abs(a.pred_to_gt - b.pred_to_gt) < 1e-9);
    CHECK(std::abs(a.gt_to_pred - b.gt_to_pred) < 1e-9);
  }
}

TEST_CASE("table and csv formatting") {
  std::vector<data::CompletionSample> one{samples(1).front()};
  one.front().missing_gt = PointCloud({{0, 0, 0}});
  const auto r = evaluate(shifted_oracle(0.1), one, EvalMode::missing);
  const std::string table = format_table(r);
  CHECK(table.find("[Pred \xE2\x86\x92 GT error / GT \xE2\x86\x92 Pred error], scaled by 1000") !=
        std::string::npos);
  CHECK(table.find("missing point cloud") != std::string::npos);
  CHECK(table.find("10.000 / 10.000") != std::string::npos);
  CHECK(table.find("Mean") != std::string::npos);
  CHECK(table.find("PF-Net") != std::string::npos);

  const auto overall = evaluate(oracle_predictor(), one, EvalMode::overall);
  CHECK(format_table(overall).find("overall point cloud") != std::string::npos);

  const std::vector<MetricReport> reports{overall, r};
  const std::string csv = format_csv(reports);
  CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("overall,mean,") != std::string::npos);
  const auto at = csv.find("missing,mean,1,");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(csv.substr(at + 15)) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("mode names round trip") {
  CHECK(parse_mode(mode_name(EvalMode::overall)) == EvalMode::overall);
  CHECK(parse_mode(mode_name(EvalMode::missing)) == EvalMode::missing);
  CHECK_THROWS(parse_mode("sideways"));
}

TEST_CASE("a model predicting the wrong M is a configuration error") {
  model::ModelConfig c = model::ModelConfig::paper(64).scaled_down(16);
  c.decoder.m1 = 8;
  c.decoder.m2 = 16;
  model::PFNet net(c, 1);
  const auto s = samples(1);  // 128 points, 32 missing
  CHECK_THROWS_AS(evaluate(model_predictor(net), s, EvalMode::missing), ConfigError);
}
