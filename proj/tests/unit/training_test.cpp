#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "pfnet/data/dataset.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/geometry/ifps.hpp"
#include "pfnet/tensor/checkpoint.hpp"
#include "pfnet/training/losses.hpp"
#include "pfnet/training/trainer.hpp"
#include "test_util.hpp"

using namespace pfnet;
using namespace pfnet::training;
using geometry::PointCloud;

namespace {

MultiStageTargets single_point_targets() {
  MultiStageTargets t;
  t.y_gt = PointCloud({{1, 0, 0}});
  t.y_gt_primary = PointCloud({{0, 1, 0}});
  t.y_gt_secondary = PointCloud({{0, 0, 1}});
  return t;
}

model::DecoderOutput origin_predictions(Graph& g) {
  const Tensor origin = Tensor::matrix({{0, 0, 0}});
  return {g.constant(origin), g.constant(origin), g.constant(origin)};
}

Var probabilities(Graph& g, std::initializer_list<double> p) {
  Tensor t({p.size(), 1});
  t.values.assign(p);
  return g.constant(t);
}

std::vector<data::CompletionSample> tiny_samples(std::size_t shapes_per_category = 2) {
  data::DatasetSpec spec;
  spec.n_points = 80;
  spec.missing_ratio = 0.2;
  spec.shapes_per_category = shapes_per_category;
  spec.train_fraction = 1.0;
  spec.seed = 3;
  return data::generate_dataset(spec).split("train");
}

model::ModelConfig tiny_config() {
  model::ModelConfig c = model::ModelConfig::paper(16).scaled_down(16);
  c.decoder.m1 = 4;
  c.decoder.m2 = 8;
  return c;
}

std::vector<std::vector<double>> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.tensor->values);
  return out;
}

TrainConfig quick(std::size_t iterations) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  c.max_iterations = iterations;
  c.seed = 5;
  c.log_timing = false;
  return c;
}

}  // namespace

TEST_CASE("completion loss fixtures") {
  Graph g;
  const std::vector<MultiStageTargets> targets{single_point_targets()};
  const auto loss = completion_loss(g, origin_predictions(g), targets, LossWeights{});
  CHECK(loss.total.item() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(loss.cd1.item() == doctest::Approx(2.0));
  CHECK(loss.cd2.item() == doctest::Approx(2.0));
  CHECK(loss.cd3.item() == doctest::Approx(2.0));

  LossWeights no_stages;
  no_stages.alpha = 0.0;
  CHECK(completion_loss(g, origin_predictions(g), targets, no_stages).total.item() == 2.0);

  MultiStageTargets exact;
  exact.y_gt = exact.y_gt_primary = exact.y_gt_secondary = PointCloud({{0, 0, 0}});
  const std::vector<MultiStageTargets> exact_targets{exact};
  CHECK(completion_loss(g, origin_predictions(g), exact_targets, LossWeights{}).total.item() == 0.0);
}

TEST_CASE("swapped stage weights move 2 alpha onto the primary term") {
  Graph g;
  MultiStageTargets t = single_point_targets();
  t.y_gt_primary = PointCloud({{0, 2, 0}});  // cd2 = 8, cd3 = 2
  const std::vector<MultiStageTargets> targets{t};
  LossWeights w;
  CHECK(completion_loss(g, origin_predictions(g), targets, w).total.item() ==
        doctest::Approx(2.0 + 0.5 * 8.0 + 1.0 * 2.0));
  w.swap_stage_weights = true;
  CHECK(completion_loss(g, origin_predictions(g), targets, w).total.item() ==
        doctest::Approx(2.0 + 1.0 * 8.0 + 0.5 * 2.0));
}

TEST_CASE("completion loss names the mismatched stage") {
  Graph g;
  MultiStageTargets t = single_point_targets();
  t.y_gt_secondary = PointCloud({{0, 0, 1}, {0, 0, 2}});
  const std::vector<MultiStageTargets> targets{t};
  try {
    completion_loss(g, origin_predictions(g), targets, LossWeights{});
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("secondary") != std::string::npos);
  }
}

TEST_CASE("discriminator loss examples") {
  Graph g;
  CHECK(discriminator_loss(probabilities(g, {0.5, 0.5}), probabilities(g, {0.5})).item() ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  std::size_t clamped = 0;
  const double perfect =
      discriminator_loss(probabilities(g, {1.0}), probabilities(g, {0.0}), &clamped).item();
  CHECK(perfect >= 0.0);
  CHECK(perfect < 1e-6);
  CHECK(clamped == 2);
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double v = discriminator_loss(probabilities(g, {p}), probabilities(g, {p})).item();
    CHECK(v >= 2.0 * std::log(2.0) - 1e-12);
  }
}

TEST_CASE("generator adversarial loss examples") {
  Graph g;
  CHECK(generator_adversarial_loss(probabilities(g, {0.5})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(generator_adversarial_loss(probabilities(g, {1.0})).item() < 1e-6);
  double previous = 1e300;
  for (double p = 0.01; p < 1.0; p += 0.01) {
    const double v = generator_adversarial_loss(probabilities(g, {p})).item();
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("joint generator loss weighting") {
  Graph g;
  const Var com = g.constant(Tensor::scalar(1.0));
  const Var adv = g.constant(Tensor::scalar(2.0));
  CHECK(joint_generator_loss(com, adv, LossWeights{0.5, 0.95, 0.05}).item() ==
        doctest::Approx(1.05).epsilon(1e-12));
  CHECK(joint_generator_loss(com, Var(), LossWeights::vanilla()).item() == 1.0);
  CHECK(joint_generator_loss(com, adv, LossWeights{0.5, 0.0, 1.0}).item() == 2.0);
  CHECK_THROWS_AS(joint_generator_loss(com, adv, LossWeights{0.5, 0.9, 0.2}), ConfigError);
  CHECK_THROWS_AS(joint_generator_loss(com, Var(), LossWeights{}), UsageError);
}

TEST_CASE("coarse targets are seeded IFPS subsets") {
  const auto samples = tiny_samples(1);
  const auto t = make_targets(samples[0].missing_gt, 4, 8, 77);
  CHECK(t.y_gt == samples[0].missing_gt);
  CHECK(t.y_gt_primary ==
        geometry::ifps_points(samples[0].missing_gt, 4, geometry::IfpsStart::seeded, 77));
  CHECK(t.y_gt_secondary ==
        geometry::ifps_points(samples[0].missing_gt, 8, geometry::IfpsStart::seeded, 77));
}

TEST_CASE("each half of an alternating step leaves the other network untouched") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 1);
  Trainer trainer(net, samples, quick(1), LossWeights{});
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const Batch b = trainer.batch(idx);
  IterationRecord rec;
  GeneratorPass pass = trainer.generator_forward(b);

  const auto g0 = snapshot(net.generator_parameters());
  const auto d0 = snapshot(net.discriminator_parameters());
  trainer.discriminator_step(b, pass.output.decoder.detail.value(), rec);
  CHECK(snapshot(net.generator_parameters()) == g0);
  const auto d1 = snapshot(net.discriminator_parameters());
  CHECK(d1 != d0);

  trainer.generator_step(b, pass, rec);
  CHECK(snapshot(net.discriminator_parameters()) == d1);
  CHECK(snapshot(net.generator_parameters()) != g0);
  CHECK(rec.loss_adv_g > 0.0);
}

TEST_CASE("vanilla training never evaluates the discriminator") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 2);
  const auto d0 = snapshot(net.discriminator_parameters());
  std::vector<std::vector<double>> stats0;
  net.visit_buffers([&](const std::string& n, Tensor& t) {
    if (n.rfind("disc.", 0) == 0) stats0.push_back(t.values);
  });
  const auto result = train(net, samples, quick(3), LossWeights::vanilla());
  CHECK(result.discriminator_steps == 0);
  CHECK(snapshot(net.discriminator_parameters()) == d0);
  std::vector<std::vector<double>> stats1;
  net.visit_buffers([&](const std::string& n, Tensor& t) {
    if (n.rfind("disc.", 0) == 0) stats1.push_back(t.values);
  });
  CHECK(stats1 == stats0);
  for (const auto& r : result.log) {
    CHECK(r.loss_adv_g == 0.0);
    CHECK(r.loss_d == 0.0);
    CHECK(r.loss_total ==
          doctest::Approx(r.loss_cd1 + 0.5 * r.loss_cd2 + 1.0 * r.loss_cd3).epsilon(1e-12));
  }
}

TEST_CASE("zero discriminator steps keep the discriminator fixed") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 3);
  const auto d0 = snapshot(net.discriminator_parameters());
  TrainConfig c = quick(2);
  c.d_steps_per_g_step = 0;
  const auto result = train(net, samples, c, LossWeights::vanilla());
  CHECK(result.discriminator_steps == 0);
  CHECK(snapshot(net.discriminator_parameters()) == d0);
}

TEST_CASE("adversarial training alternates one discriminator step per batch") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 4);
  TrainConfig c = quick(3);
  c.d_steps_per_g_step = 2;
  const auto result = train(net, samples, c, LossWeights{});
  CHECK(result.discriminator_steps == 6);
  for (const auto& r : result.log) {
    CHECK(r.loss_d > 0.0);
    CHECK(r.loss_total ==
          doctest::Approx(0.95 * (r.loss_cd1 + 0.5 * r.loss_cd2 + r.loss_cd3) + 0.05 * r.loss_adv_g)
              .epsilon(1e-12));
  }
}

TEST_CASE("training is deterministic given the seed") {
  const auto samples = tiny_samples();
  auto run = [&] {
    model::PFNet net(tiny_config(), 6);
    const auto result = train(net, samples, quick(4), LossWeights{});
    std::string log;
    for (const auto& r : result.log) log += format_log_row(r, false) + "\n";
    return std::make_pair(log, snapshot(net.generator_parameters()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("epochs drop the incomplete last batch") {
  const auto samples = tiny_samples();  // 10 samples
  REQUIRE(samples.size() == 10);
  model::PFNet net(tiny_config(), 7);
  TrainConfig c = quick(0);
  c.epochs = 2;
  CHECK(train(net, samples, c, LossWeights::vanilla()).log.size() == 4);
}

TEST_CASE("log and checkpoints are written at the configured cadence") {
  test::TempDir dir("train");
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 8);
  TrainConfig c = quick(4);
  c.checkpoint_every = 2;
  c.output_dir = dir.path();
  const auto result = train(net, samples, c, LossWeights{});
  CHECK(std::filesystem::exists(dir / "checkpoint_2.pfn"));
  CHECK(std::filesystem::exists(dir / "checkpoint_4.pfn"));
  CHECK(result.last_checkpoint == dir / "last.pfn");
  const Checkpoint ck = read_checkpoint(dir / "checkpoint_2.pfn");
  CHECK(ck.header_value("train.iteration") == "2");
  CHECK(ck.header_value("train.seed") == "5");
  CHECK(ck.header_value("loss.lambda_adv") == "0.05");

  const std::string log = test::read_file(dir / "train_log.csv");
  CHECK(log.rfind(std::string(kLogHeader) + "\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 5);

  const model::PFNet back = model::PFNet::load(dir / "last.pfn");
  CHECK(back.config().decoder.m == 16);
}

TEST_CASE("a non-finite loss aborts with the iteration index") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 9);
  auto& bias = net.decoder().head_primary().bias.values;
  bias[0] = std::nan("");
  try {
    train(net, samples, quick(2), LossWeights::vanilla());
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("invalid training setups are rejected") {
  const auto samples = tiny_samples();
  model::PFNet net(tiny_config(), 10);
  TrainConfig c = quick(1);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(train(net, samples, c, LossWeights{}), ConfigError);
  CHECK_THROWS_AS(train(net, samples, quick(1), LossWeights{0.5, 0.5, 0.6}), ConfigError);
  TrainConfig big = quick(1);
  big.batch_size = 11;
  CHECK_THROWS_AS(train(net, samples, big, LossWeights{}), ConfigError);
  model::ModelConfig wrong_m = tiny_config();
  wrong_m.decoder.m = 32;
  model::PFNet other(wrong_m, 1);
  CHECK_THROWS_AS(train(other, samples, quick(1), LossWeights{}), ConfigError);
}

TEST_CASE("train settings round trip through key=value text") {
  TrainConfig c = quick(9);
  c.d_steps_per_g_step = 3;
  CHECK(TrainConfig::from_key_values(c.to_key_values()).to_key_values() == c.to_key_values());
  const LossWeights w{0.25, 0.9, 0.1, true};
  CHECK(loss_weights_to_key_values(loss_weights_from_key_values(loss_weights_to_key_values(w))) ==
        loss_weights_to_key_values(w));
}
