#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pfnet/errors.hpp"
#include "pfnet/model/pfnet.hpp"
#include "pfnet/tensor/ops.hpp"
#include "test_util.hpp"

using namespace pfnet;
using namespace pfnet::model;
using geometry::PointCloud;

namespace {

std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t cmlp_params(std::size_t in, const std::vector<std::size_t>& widths) {
  std::size_t n = 0;
  for (std::size_t w : widths) {
    n += linear_params(in, w) + 2 * w;
    in = w;
  }
  return n;
}

std::vector<double> values(const Var& v) { return v.value().values; }

PointCloud permuted(const PointCloud& c, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return geometry::gather(c, perm);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

ModelConfig small_config() {
  ModelConfig c = ModelConfig::paper(64).scaled_down(8);
  c.decoder.m1 = 8;
  c.decoder.m2 = 16;
  return c;
}

}  // namespace

TEST_CASE("paper configuration dimensions") {
  const ModelConfig c = ModelConfig::paper();
  CHECK(c.encoder.combined_dim() == 1920);
  CHECK(c.discriminator.latent_dim() == 448);
  CHECK(c.encoder.scale_sizes(1536) == std::vector<std::size_t>{1536, 768, 384});
}

TEST_CASE("parameter count matches the closed form") {
  PFNet net(ModelConfig::paper(), 1);
  const std::size_t encoder = 3 * cmlp_params(3, {64, 128, 256, 512, 1024}) + linear_params(3, 1);
  const std::size_t decoder = linear_params(1920, 1024) + linear_params(1024, 512) +
                              linear_params(512, 256) + linear_params(256, 64 * 3) +
                              linear_params(512, 128 * 3) + linear_params(1024, 512 * 3);
  const std::size_t disc = cmlp_params(3, {64, 64, 128, 256}) + linear_params(448, 256) + 2 * 256 +
                           linear_params(256, 128) + 2 * 128 + linear_params(128, 16) + 2 * 16 +
                           linear_params(16, 1);
  CHECK(net.parameter_count() == encoder + decoder + disc);
  const std::string summary = net.summary();
  CHECK(summary.find("mre.fusion.weight") != std::string::npos);
  CHECK(summary.find(std::to_string(encoder + decoder + disc)) != std::string::npos);
}

TEST_CASE("generator output shapes at paper dimensions") {
  PFNet net(ModelConfig::paper(), 2);
  std::mt19937_64 rng(1);
  const std::vector<PointCloud> partials{test::random_cloud(1536, rng), test::random_cloud(1536, rng)};
  Graph g;
  const auto out = net.generate(g, partials, Mode::eval, Binding::frozen);
  CHECK(out.encoder.feature.shape() == Shape{2, 1920});
  CHECK(out.encoder.latent_map.shape() == Shape{2 * 1920, 3});
  CHECK(out.decoder.primary.shape() == Shape{2 * 64, 3});
  CHECK(out.decoder.secondary.shape() == Shape{2 * 128, 3});
  CHECK(out.decoder.detail.shape() == Shape{2 * 512, 3});
  const auto d = net.discriminate(g, out.decoder.detail, 2, Mode::eval, Binding::frozen);
  CHECK(d.latent.shape() == Shape{2, 448});
  CHECK(d.probability.shape() == Shape{2, 1});
  for (double p : values(d.probability)) CHECK((p > 0.0 && p < 1.0));
}

TEST_CASE("encoder downsampling sizes and divisibility") {
  MultiResolutionEncoder mre(EncoderConfig{});
  std::mt19937_64 rng(2);
  const auto scales = mre.downsample(test::random_cloud(1536, rng));
  REQUIRE(scales.size() == 3);
  CHECK(scales[0].size() == 1536);
  CHECK(scales[1].size() == 768);
  CHECK(scales[2].size() == 384);

  PFNet net(small_config(), 3);
  const std::vector<PointCloud> odd{test::random_cloud(30, rng)};
  Graph g;
  try {
    net.generate(g, odd, Mode::eval);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("pad or trim") != std::string::npos);
  }
}

TEST_CASE("cmlp is invariant to point order and duplicates") {
  Cmlp cmlp(3, {16, 32, 64}, 2);
  std::mt19937_64 rng(4);
  cmlp.initialize(rng);
  const PointCloud c = test::random_cloud(50, rng);
  PointCloud dup = c;
  dup.points.insert(dup.points.end(), c.points.begin(), c.points.begin() + 10);
  Graph g;
  const auto a = values(cmlp.forward(g, g.constant(c.to_tensor()), 1, Mode::eval, Binding::frozen));
  const auto b = values(
      cmlp.forward(g, g.constant(permuted(c, rng).to_tensor()), 1, Mode::eval, Binding::frozen));
  const auto d = values(cmlp.forward(g, g.constant(dup.to_tensor()), 1, Mode::eval, Binding::frozen));
  CHECK(a.size() == 32 + 64);
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(max_abs_diff(a, d) == 0.0);
}

TEST_CASE("completion is invariant to the order of input points") {
  PFNet net(small_config(), 5);
  std::mt19937_64 rng(5);
  const PointCloud c = test::random_cloud(64, rng);
  const auto a = net.complete(c);
  const auto b = net.complete(permuted(c, rng));
  REQUIRE(a.size() == 3);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(max_abs_diff(a[s].to_tensor().values, b[s].to_tensor().values) <= 1e-12);
  }
  CHECK(a[0].size() == 8);
  CHECK(a[1].size() == 16);
  CHECK(a[2].size() == 64);
}

TEST_CASE("identical scales with identical weights give identical latent columns") {
  EncoderConfig ec;
  ec.cmlp_widths = {8, 16, 32};
  ec.pooled_layers = 2;
  MultiResolutionEncoder mre(ec);
  std::mt19937_64 rng(6);
  mre.initialize(rng);
  std::vector<std::pair<std::string, Tensor*>> first;
  mre.cmlp(0).visit("", [&](const std::string& n, Tensor& t) { first.emplace_back(n, &t); });
  for (std::size_t s = 1; s < 3; ++s) {
    std::size_t i = 0;
    mre.cmlp(s).visit("", [&](const std::string&, Tensor& t) { t = *first[i++].second; });
  }
  Graph g;
  const Var pts = g.constant(test::random_cloud(20, rng).to_tensor());
  const auto out = mre.forward_scales(g, {pts, pts, pts}, 1, Mode::eval, Binding::frozen);
  const Tensor& map = out.latent_map.value();
  for (std::size_t r = 0; r < map.rows(); ++r) {
    CHECK(map.at(r, 1) == map.at(r, 0));
    CHECK(map.at(r, 2) == map.at(r, 0));
  }
}

TEST_CASE("fusion weights (1, 0, 0) select the first scale") {
  PFNet net(small_config(), 7);
  Linear& fusion = net.encoder().fusion();
  fusion.weight.values = {1.0, 0.0, 0.0};
  fusion.bias.values = {0.0};
  std::mt19937_64 rng(7);
  const std::vector<PointCloud> partials{test::random_cloud(64, rng)};
  Graph g;
  const auto out = net.generate(g, partials, Mode::eval, Binding::frozen);
  CHECK(values(out.encoder.feature) == values(out.encoder.scale_features[0]));
}

TEST_CASE("zero offset heads repeat the coarser stage") {
  PFNet net(small_config(), 8);
  for (Linear* head : {&net.decoder().head_secondary(), &net.decoder().head_detail()}) {
    std::fill(head->weight.values.begin(), head->weight.values.end(), 0.0);
    std::fill(head->bias.values.begin(), head->bias.values.end(), 0.0);
  }
  std::mt19937_64 rng(8);
  const std::vector<PointCloud> partials{test::random_cloud(64, rng)};
  Graph g;
  const auto out = net.generate(g, partials, Mode::eval, Binding::frozen);
  const Tensor& p = out.decoder.primary.value();
  const Tensor& s = out.decoder.secondary.value();
  const Tensor& d = out.decoder.detail.value();
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(s.at(i, k) == p.at(i / 2, k));
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(d.at(i, k) == s.at(i / 4, k));
}

TEST_CASE("shifting the primary head bias translates every stage") {
  PFNet net(small_config(), 9);
  std::mt19937_64 rng(9);
  const std::vector<PointCloud> partials{test::random_cloud(64, rng)};
  const std::array<double, 3> delta{0.3, -0.2, 0.1};
  Graph g;
  const auto before = net.generate(g, partials, Mode::eval, Binding::frozen);
  auto& bias = net.decoder().head_primary().bias.values;
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += delta[i % 3];
  Graph h;
  const auto after = net.generate(h, partials, Mode::eval, Binding::frozen);
  for (auto stage : {&DecoderOutput::primary, &DecoderOutput::secondary, &DecoderOutput::detail}) {
    const Tensor& a = (before.decoder.*stage).value();
    const Tensor& b = (after.decoder.*stage).value();
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(b.at(i, k) - a.at(i, k) - delta[k]) < 1e-12);
  }
}

TEST_CASE("discriminator is permutation invariant and bounded") {
  PFNet net(small_config(), 10);
  std::mt19937_64 rng(10);
  const PointCloud c = test::random_cloud(64, rng);
  Graph g;
  const auto a = net.discriminate(g, g.constant(c.to_tensor()), 1, Mode::eval, Binding::frozen);
  const auto b = net.discriminate(g, g.constant(permuted(c, rng).to_tensor()), 1, Mode::eval,
                                  Binding::frozen);
  CHECK(values(a.probability) == values(b.probability));
  const double p = a.probability.item();
  CHECK((p > 0.0 && p < 1.0));
}

TEST_CASE("a frozen discriminator passes gradients without touching its state") {
  PFNet net(small_config(), 11);
  std::mt19937_64 rng(11);
  std::vector<PointCloud> clouds{test::random_cloud(64, rng), test::random_cloud(64, rng)};
  std::vector<std::vector<double>> stats_before;
  net.visit_buffers([&](const std::string&, Tensor& t) { stats_before.push_back(t.values); });
  Graph g;
  const Var x = g.variable(geometry::stack_clouds(clouds));
  const auto d = net.discriminate(g, x, 2, Mode::train, Binding::frozen);
  g.backward(ops::sum(d.probability));
  CHECK_FALSE(g.grad(x).empty());
  net.visit_discriminator([](const std::string& name, Tensor& t) {
    INFO(name);
    CHECK_FALSE(t.grad.has_value());
  });
  std::size_t i = 0;
  net.visit_buffers([&](const std::string&, Tensor& t) { CHECK(t.values == stats_before[i++]); });
}

TEST_CASE("generator and discriminator parameters are disjoint and complete") {
  PFNet net(small_config(), 12);
  const auto gp = net.generator_parameters();
  const auto dp = net.discriminator_parameters();
  for (const auto& p : gp) CHECK(p.name.rfind("disc.", 0) != 0);
  for (const auto& p : dp) CHECK(p.name.rfind("disc.", 0) == 0);
  std::size_t total = 0;
  for (const auto* set : {&gp, &dp})
    for (const auto& p : *set) total += p.tensor->size();
  CHECK(total == net.parameter_count());
}

TEST_CASE("checkpoint round trip restores identical predictions") {
  test::TempDir dir("model");
  PFNet net(small_config(), 13);
  std::mt19937_64 rng(13);
  const std::vector<PointCloud> train_batch{test::random_cloud(64, rng), test::random_cloud(64, rng)};
  {
    Graph g;
    net.generate(g, train_batch, Mode::train);
  }
  net.save(dir / "m.pfn", {{"note", "x"}});
  PFNet back = PFNet::load(dir / "m.pfn");
  const PointCloud probe = test::random_cloud(64, rng);
  const auto a = net.complete(probe);
  const auto b = back.complete(probe);
  for (std::size_t s = 0; s < 3; ++s) CHECK(a[s] == b[s]);
  CHECK(read_checkpoint(dir / "m.pfn").header_value("note") == "x");
}

TEST_CASE("checkpoints with missing, extra or mis-shaped tensors are rejected") {
  PFNet net(small_config(), 14);
  const Checkpoint good = net.to_checkpoint();
  CHECK_NOTHROW(PFNet::from_checkpoint(good));

  Checkpoint missing = good;
  missing.tensors.pop_back();
  CHECK_THROWS_AS(PFNet::from_checkpoint(missing), ConfigError);

  Checkpoint extra = good;
  extra.tensors.emplace_back("mre.bogus", Tensor::vector({1.0}));
  CHECK_THROWS_AS(PFNet::from_checkpoint(extra), ConfigError);

  Checkpoint wrong = good;
  wrong.tensors.front().second = Tensor::vector({1.0, 2.0});
  CHECK_THROWS_AS(PFNet::from_checkpoint(wrong), ConfigError);
}

TEST_CASE("invalid configurations are rejected") {
  ModelConfig c = ModelConfig::paper();
  c.decoder.m2 = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig::paper();
  c.decoder.m = 500;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig::paper();
  c.encoder.pooled_layers = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(ModelConfig::from_key_values(small_config().to_key_values()).to_key_values() ==
        small_config().to_key_values());
}
