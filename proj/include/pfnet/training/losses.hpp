#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "pfnet/geometry/point_cloud.hpp"
#include "pfnet/model/pfnet.hpp"
#include "pfnet/tensor/graph.hpp"

namespace pfnet::training {

struct LossWeights {
  double alpha = 0.5;
  double lambda_com = 0.95;
  double lambda_adv = 0.05;
  // Puts alpha on the secondary term and 2*alpha on the primary term instead.
  bool swap_stage_weights = false;

  // alpha >= 0, both lambdas in [0, 1] and summing to 1.
  void validate() const;
  static LossWeights vanilla(double alpha = 0.5) { return {alpha, 1.0, 0.0, false}; }
};

// Ground truth for the three decoder stages; the coarse targets are IFPS
// subsets of y_gt drawn with a fixed seed.
struct MultiStageTargets {
  geometry::PointCloud y_gt;
  geometry::PointCloud y_gt_primary;
  geometry::PointCloud y_gt_secondary;
  std::uint64_t seed = 0;
};

MultiStageTargets make_targets(const geometry::PointCloud& missing_gt, std::size_t m1,
                               std::size_t m2, std::uint64_t seed);

// Batch means of the per-sample Chamfer distances and the weighted total.
struct CompletionLoss {
  Var total;
  Var cd1;  // detail vs y_gt
  Var cd2;  // primary vs y_gt_primary
  Var cd3;  // secondary vs y_gt_secondary
};

// cd1 + alpha * cd2 + 2 * alpha * cd3, averaged over the batch.
CompletionLoss completion_loss(Graph& g, const model::DecoderOutput& predictions,
                               std::span<const MultiStageTargets> targets, const LossWeights& weights);

inline constexpr double kProbabilityEpsilon = 1e-7;

// -mean(log d_real) - mean(log(1 - d_fake)). Probabilities are clamped into
// [eps, 1 - eps]; `clamped`, when given, counts the clamped entries.
Var discriminator_loss(Var d_real, Var d_fake, std::size_t* clamped = nullptr);

// Non-saturating generator objective: -mean(log d_fake).
Var generator_adversarial_loss(Var d_fake, std::size_t* clamped = nullptr);

// lambda_com * completion + lambda_adv * adversarial. With lambda_adv = 0 the
// adversarial term may be left unset and is never touched.
Var joint_generator_loss(Var completion, Var adversarial, const LossWeights& weights);

}  // namespace pfnet::training
