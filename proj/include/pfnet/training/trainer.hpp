#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pfnet/data/holes.hpp"
#include "pfnet/key_value.hpp"
#include "pfnet/model/pfnet.hpp"
#include "pfnet/tensor/adam.hpp"
#include "pfnet/training/losses.hpp"

namespace pfnet::training {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 8;
  std::size_t epochs = 1;
  // When nonzero, runs exactly this many iterations regardless of `epochs`.
  std::size_t max_iterations = 0;
  std::uint64_t seed = 0;
  std::size_t d_steps_per_g_step = 1;
  // Writes checkpoint_<iter>.pfn every this many iterations when nonzero.
  std::size_t checkpoint_every = 0;
  // Receives train_log.csv and the checkpoints; nothing is written when empty.
  std::filesystem::path output_dir;
  // When false the seconds column is written as 0 so logs are byte-comparable.
  bool log_timing = true;

  void validate() const;
  KeyValues to_key_values() const;
  // Reads the "train.*" keys, keeping defaults for absent ones.
  static TrainConfig from_key_values(const KeyValues& kv);
  static TrainConfig from_key_values(const KeyValues& kv, TrainConfig base);
};

KeyValues loss_weights_to_key_values(const LossWeights& weights);
LossWeights loss_weights_from_key_values(const KeyValues& kv, LossWeights base = LossWeights());

struct IterationRecord {
  std::size_t iter = 0;  // 1-based
  double loss_total = 0.0;
  double loss_cd1 = 0.0;
  double loss_cd2 = 0.0;
  double loss_cd3 = 0.0;
  double loss_adv_g = 0.0;
  double loss_d = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  // Mean discriminator output on the real and fake halves of the last
  // discriminator step (0 when no step ran).
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

struct TrainResult {
  std::vector<IterationRecord> log;
  std::size_t discriminator_steps = 0;
  std::size_t clamped_probabilities = 0;
  std::filesystem::path last_checkpoint;
};

inline constexpr const char* kLogHeader =
    "iter,loss_total,loss_cd1,loss_cd2,loss_cd3,loss_adv_g,loss_d,lr,seconds";

std::string format_log_row(const IterationRecord& r, bool with_timing);

// Seed of the IFPS draws producing the coarse targets of sample `index`.
std::uint64_t target_seed(std::size_t index);

// One minibatch: partial inputs, coarse targets, and real missing regions
// stacked into a [B*M x 3] tensor.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<geometry::PointCloud> partials;
  std::vector<MultiStageTargets> targets;
  Tensor real;
  std::size_t size() const { return indices.size(); }
};

// A trainable generator forward whose graph the generator step continues.
struct GeneratorPass {
  std::unique_ptr<Graph> graph;
  model::GeneratorOutput output;
};

// Alternating optimization: per batch, `d_steps_per_g_step` discriminator
// updates on (real missing regions, detached fake detail clouds), then one
// generator update on the joint loss. With lambda_adv = 0 the discriminator is
// never evaluated. Throws NumericError naming the iteration on a non-finite loss.
class Trainer {
 public:
  Trainer(model::PFNet& net, std::span<const data::CompletionSample> samples,
          const TrainConfig& config, const LossWeights& weights);

  Batch batch(std::span<const std::size_t> indices) const;
  GeneratorPass generator_forward(const Batch& b);
  // Updates only discriminator parameters.
  void discriminator_step(const Batch& b, const Tensor& fake, IterationRecord& rec);
  // Updates only generator parameters; the discriminator is frozen.
  void generator_step(const Batch& b, GeneratorPass& pass, IterationRecord& rec);
  IterationRecord iterate(const Batch& b, std::size_t iter);
  TrainResult run();

  bool adversarial() const { return weights_.lambda_adv > 0.0; }
  const std::vector<MultiStageTargets>& targets() const { return targets_; }
  std::size_t discriminator_steps() const { return discriminator_steps_; }

 private:
  model::PFNet& net_;
  std::span<const data::CompletionSample> samples_;
  TrainConfig config_;
  LossWeights weights_;
  Adam g_opt_;
  Adam d_opt_;
  std::vector<MultiStageTargets> targets_;
  std::size_t discriminator_steps_ = 0;
  std::size_t clamped_ = 0;
  std::filesystem::path last_checkpoint_;
};

TrainResult train(model::PFNet& net, std::span<const data::CompletionSample> samples,
                  const TrainConfig& config, const LossWeights& weights);

}  // namespace pfnet::training
