#include "pfnet/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "pfnet/data/cloud_io.hpp"
#include "pfnet/data/dataset.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/tensor/adam.hpp"
#include "pfnet/tensor/ops.hpp"

namespace pfnet::training {

using data::CompletionSample;
using geometry::PointCloud;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs == 0 && max_iterations == 0)
    throw ConfigError("either epochs or max_iterations must be positive");
}

KeyValues TrainConfig::to_key_values() const {
  return {
      {"train.learning_rate", data::format_double(learning_rate)},
      {"train.batch_size", std::to_string(batch_size)},
      {"train.epochs", std::to_string(epochs)},
      {"train.max_iterations", std::to_string(max_iterations)},
      {"train.seed", std::to_string(seed)},
      {"train.d_steps_per_g_step", std::to_string(d_steps_per_g_step)},
      {"train.checkpoint_every", std::to_string(checkpoint_every)},
      {"train.log_timing", log_timing ? "1" : "0"},
  };
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
  return from_key_values(kv, TrainConfig{});
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv, TrainConfig c) {
  auto has = [&kv](const char* key) { return kv.count(key) != 0; };
  if (has("train.learning_rate")) c.learning_rate = kv_double(kv, "train.learning_rate");
  if (has("train.batch_size")) c.batch_size = kv_uint(kv, "train.batch_size");
  if (has("train.epochs")) c.epochs = kv_uint(kv, "train.epochs");
  if (has("train.max_iterations")) c.max_iterations = kv_uint(kv, "train.max_iterations");
  if (has("train.seed")) c.seed = kv_uint(kv, "train.seed");
  if (has("train.d_steps_per_g_step"))
    c.d_steps_per_g_step = kv_uint(kv, "train.d_steps_per_g_step");
  if (has("train.checkpoint_every")) c.checkpoint_every = kv_uint(kv, "train.checkpoint_every");
  if (has("train.log_timing")) c.log_timing = kv_uint(kv, "train.log_timing") != 0;
  return c;
}

KeyValues loss_weights_to_key_values(const LossWeights& w) {
  return {
      {"loss.alpha", data::format_double(w.alpha)},
      {"loss.lambda_com", data::format_double(w.lambda_com)},
      {"loss.lambda_adv", data::format_double(w.lambda_adv)},
      {"loss.swap_stage_weights", w.swap_stage_weights ? "1" : "0"},
  };
}

LossWeights loss_weights_from_key_values(const KeyValues& kv, LossWeights w) {
  if (kv.count("loss.alpha")) w.alpha = kv_double(kv, "loss.alpha");
  if (kv.count("loss.lambda_com")) w.lambda_com = kv_double(kv, "loss.lambda_com");
  if (kv.count("loss.lambda_adv")) w.lambda_adv = kv_double(kv, "loss.lambda_adv");
  if (kv.count("loss.swap_stage_weights"))
    w.swap_stage_weights = kv_uint(kv, "loss.swap_stage_weights") != 0;
  return w;
}

std::string format_log_row(const IterationRecord& r, bool with_timing) {
  using data::format_double;
  return std::to_string(r.iter) + ',' + format_double(r.loss_total) + ',' +
         format_double(r.loss_cd1) + ',' + format_double(r.loss_cd2) + ',' +
         format_double(r.loss_cd3) + ',' + format_double(r.loss_adv_g) + ',' +
         format_double(r.loss_d) + ',' + format_double(r.lr) + ',' +
         format_double(with_timing ? r.seconds : 0.0);
}

std::uint64_t target_seed(std::size_t index) {
  return data::mix_seed(0x7461726765747321ull, index);
}

namespace {

void check_samples(std::span<const CompletionSample> samples, const model::ModelConfig& mc,
                   std::size_t batch_size) {
  if (samples.empty()) throw ConfigError("training set is empty");
  if (samples.size() < batch_size)
    throw ConfigError("training set of " + std::to_string(samples.size()) +
                      " samples is smaller than the batch size " + std::to_string(batch_size));
  const std::size_t n_partial = samples.front().partial.size();
  for (const auto& s : samples) {
    if (s.missing_gt.size() != mc.decoder.m)
      throw ConfigError("sample missing region has " + std::to_string(s.missing_gt.size()) +
                        " points but the model predicts M=" + std::to_string(mc.decoder.m));
    if (s.partial.size() != n_partial)
      throw ConfigError("all partial clouds must have the same size");
  }
}

bool finite(double v) { return std::isfinite(v); }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Trainer::Trainer(model::PFNet& net, std::span<const CompletionSample> samples,
                 const TrainConfig& config, const LossWeights& weights)
    : net_(net),
      samples_(samples),
      config_(config),
      weights_(weights),
      g_opt_(net.generator_parameters(), AdamOptions{.learning_rate = config.learning_rate}),
      d_opt_(net.discriminator_parameters(), AdamOptions{.learning_rate = config.learning_rate}) {
  config_.validate();
  weights_.validate();
  const auto& mc = net_.config();
  check_samples(samples_, mc, config_.batch_size);
  targets_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i)
    targets_.push_back(make_targets(samples_[i].missing_gt, mc.decoder.m1, mc.decoder.m2,
                                    target_seed(i)));
}

Batch Trainer::batch(std::span<const std::size_t> indices) const {
  Batch b;
  std::vector<PointCloud> reals;
  for (std::size_t idx : indices) {
    if (idx >= samples_.size()) throw UsageError("batch index out of range");
    b.indices.push_back(idx);
    b.partials.push_back(samples_[idx].partial);
    b.targets.push_back(targets_[idx]);
    reals.push_back(samples_[idx].missing_gt);
  }
  if (b.indices.empty()) throw UsageError("empty batch");
  b.real = geometry::stack_clouds(reals);
  return b;
}

GeneratorPass Trainer::generator_forward(const Batch& b) {
  GeneratorPass pass;
  pass.graph = std::make_unique<Graph>();
  pass.output = net_.generate(*pass.graph, b.partials, Mode::train, model::Binding::trainable);
  return pass;
}

void Trainer::discriminator_step(const Batch& b, const Tensor& fake, IterationRecord& rec) {
  const std::size_t bs = b.size();
  Graph dg;
  const Var both =
      ops::concat_rows(std::vector<Var>{dg.constant(b.real), dg.constant(fake)});
  const auto d = net_.discriminate(dg, both, 2 * bs, Mode::train, model::Binding::trainable);
  const Var p_real = ops::slice_rows(d.probability, 0, bs);
  const Var p_fake = ops::slice_rows(d.probability, bs, 2 * bs);
  rec.d_real_mean = mean_of(p_real.value().values);
  rec.d_fake_mean = mean_of(p_fake.value().values);
  const Var loss_d = discriminator_loss(p_real, p_fake, &clamped_);
  rec.loss_d = loss_d.item();
  if (!finite(rec.loss_d))
    throw NumericError("non-finite discriminator loss at iteration " + std::to_string(rec.iter));
  dg.backward(loss_d);
  d_opt_.step();
  ++discriminator_steps_;
}

void Trainer::generator_step(const Batch& b, GeneratorPass& pass, IterationRecord& rec) {
  const std::size_t bs = b.size();
  Graph& g = *pass.graph;
  const auto& dec = pass.output.decoder;
  const auto com = completion_loss(g, dec, b.targets, weights_);
  Var adv;
  if (adversarial()) {
    const Var both = ops::concat_rows(std::vector<Var>{g.constant(b.real), dec.detail});
    const auto d = net_.discriminate(g, both, 2 * bs, Mode::train, model::Binding::frozen);
    adv = generator_adversarial_loss(ops::slice_rows(d.probability, bs, 2 * bs), &clamped_);
    rec.loss_adv_g = adv.item();
  }
  const Var total = joint_generator_loss(com.total, adv, weights_);
  rec.loss_total = total.item();
  rec.loss_cd1 = com.cd1.item();
  rec.loss_cd2 = com.cd2.item();
  rec.loss_cd3 = com.cd3.item();
  for (double v : {rec.loss_total, rec.loss_cd1, rec.loss_cd2, rec.loss_cd3, rec.loss_adv_g})
    if (!finite(v))
      throw NumericError("non-finite generator loss at iteration " + std::to_string(rec.iter) +
                         (last_checkpoint_.empty()
                              ? std::string()
                              : "; last checkpoint " + last_checkpoint_.string()));
  g.backward(total);
  g_opt_.step();
}

IterationRecord Trainer::iterate(const Batch& b, std::size_t iter) {
  const auto start_time = std::chrono::steady_clock::now();
  IterationRecord rec;
  rec.iter = iter;
  rec.lr = config_.learning_rate;
  GeneratorPass pass = generator_forward(b);
  // Discriminator steps see the current generator output as constants.
  if (adversarial()) {
    const Tensor fake = pass.output.decoder.detail.value();
    for (std::size_t step = 0; step < config_.d_steps_per_g_step; ++step)
      discriminator_step(b, fake, rec);
  }
  generator_step(b, pass, rec);
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return rec;
}

TrainResult Trainer::run() {
  std::ofstream log_file;
  const bool write_files = !config_.output_dir.empty();
  if (write_files) {
    std::filesystem::create_directories(config_.output_dir);
    log_file.open(config_.output_dir / "train_log.csv", std::ios::trunc);
    if (!log_file)
      throw IoError("cannot write " + (config_.output_dir / "train_log.csv").string());
    log_file << kLogHeader << '\n';
  }

  KeyValues header = config_.to_key_values();
  for (const auto& [k, v] : loss_weights_to_key_values(weights_)) header[k] = v;

  TrainResult result;
  const std::size_t bs = config_.batch_size;
  const std::size_t batches_per_epoch = samples_.size() / bs;
  const std::size_t total_iterations =
      config_.max_iterations > 0 ? config_.max_iterations : config_.epochs * batches_per_epoch;

  auto save = [&](const std::filesystem::path& path, std::size_t iter) {
    KeyValues h = header;
    h["train.iteration"] = std::to_string(iter);
    net_.save(path, h);
    last_checkpoint_ = path;
  };

  std::vector<std::size_t> order(samples_.size());
  std::size_t iter = 0;
  for (std::size_t epoch = 0; iter < total_iterations; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(data::mix_seed(config_.seed, epoch, 0x5348));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t b = 0; b < batches_per_epoch && iter < total_iterations; ++b) {
      ++iter;
      const auto rec =
          iterate(batch(std::span<const std::size_t>(order).subspan(b * bs, bs)), iter);
      result.log.push_back(rec);
      if (write_files) {
        log_file << format_log_row(rec, config_.log_timing) << '\n';
        log_file.flush();
        if (config_.checkpoint_every > 0 && iter % config_.checkpoint_every == 0)
          save(config_.output_dir / ("checkpoint_" + std::to_string(iter) + ".pfn"), iter);
      }
    }
  }
  if (write_files) save(config_.output_dir / "last.pfn", iter);
  result.discriminator_steps = discriminator_steps_;
  result.clamped_probabilities = clamped_;
  result.last_checkpoint = last_checkpoint_;
  return result;
}

TrainResult train(model::PFNet& net, std::span<const CompletionSample> samples,
                  const TrainConfig& config, const LossWeights& weights) {
  Trainer trainer(net, samples, config, weights);
  return trainer.run();
}

}  // namespace pfnet::training
