#include "pfnet/training/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pfnet/errors.hpp"
#include "pfnet/geometry/chamfer.hpp"
#include "pfnet/geometry/ifps.hpp"
#include "pfnet/tensor/ops.hpp"

namespace pfnet::training {

using geometry::PointCloud;

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (!(lambda_com >= 0.0 && lambda_com <= 1.0) || !(lambda_adv >= 0.0 && lambda_adv <= 1.0))
    throw ConfigError("lambda_com and lambda_adv must lie in [0, 1]");
  if (std::abs(lambda_com + lambda_adv - 1.0) > 1e-12)
    throw ConfigError("lambda_com + lambda_adv must equal 1, got " +
                      std::to_string(lambda_com + lambda_adv));
}

MultiStageTargets make_targets(const PointCloud& missing_gt, std::size_t m1, std::size_t m2,
                               std::uint64_t seed) {
  MultiStageTargets t;
  t.y_gt = missing_gt;
  t.y_gt_primary = geometry::ifps_points(missing_gt, m1, geometry::IfpsStart::seeded, seed);
  t.y_gt_secondary = geometry::ifps_points(missing_gt, m2, geometry::IfpsStart::seeded, seed);
  t.seed = seed;
  return t;
}

namespace {

Var stage_chamfer(Graph& g, Var prediction, std::span<const MultiStageTargets> targets,
                  PointCloud MultiStageTargets::*member, const char* stage) {
  const std::size_t batch = targets.size();
  const std::size_t expected = (targets.front().*member).size();
  std::vector<PointCloud> clouds;
  for (const auto& t : targets) {
    if ((t.*member).size() != expected)
      throw ShapeError(std::string(stage) + " stage: targets of unequal size in one batch");
    clouds.push_back(t.*member);
  }
  const Shape want{batch * expected, 3};
  if (prediction.shape() != want)
    throw ShapeError(std::string(stage) + " stage: prediction " +
                     shape_to_string(prediction.shape()) + " does not match target " +
                     shape_to_string(want));
  const Var target = g.constant(geometry::stack_clouds(clouds));
  return ops::mean(geometry::chamfer_loss(prediction, target, batch));
}

Var clamped_probability(Var p, std::size_t* clamped) {
  return ops::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon, clamped);
}

}  // namespace

CompletionLoss completion_loss(Graph& g, const model::DecoderOutput& predictions,
                               std::span<const MultiStageTargets> targets,
                               const LossWeights& weights) {
  if (targets.empty()) throw ShapeError("completion loss: empty batch");
  CompletionLoss out;
  out.cd1 = stage_chamfer(g, predictions.detail, targets, &MultiStageTargets::y_gt, "detail");
  out.cd2 = stage_chamfer(g, predictions.primary, targets, &MultiStageTargets::y_gt_primary,
                          "primary");
  out.cd3 = stage_chamfer(g, predictions.secondary, targets, &MultiStageTargets::y_gt_secondary,
                          "secondary");
  const double w_primary = weights.swap_stage_weights ? 2.0 * weights.alpha : weights.alpha;
  const double w_secondary = weights.swap_stage_weights ? weights.alpha : 2.0 * weights.alpha;
  out.total = ops::add(out.cd1, ops::add(ops::scale(out.cd2, w_primary),
                                         ops::scale(out.cd3, w_secondary)));
  return out;
}

Var discriminator_loss(Var d_real, Var d_fake, std::size_t* clamped) {
  Graph& g = d_fake.graph();
  const Var real = clamped_probability(d_real, clamped);
  const Var fake = clamped_probability(d_fake, clamped);
  const Var ones = g.constant(Tensor(fake.shape(), 1.0));
  const Var real_term = ops::mean(ops::log(real));
  const Var fake_term = ops::mean(ops::log(ops::sub(ones, fake)));
  return ops::scale(ops::add(real_term, fake_term), -1.0);
}

Var generator_adversarial_loss(Var d_fake, std::size_t* clamped) {
  return ops::scale(ops::mean(ops::log(clamped_probability(d_fake, clamped))), -1.0);
}

Var joint_generator_loss(Var completion, Var adversarial, const LossWeights& weights) {
  weights.validate();
  if (weights.lambda_adv == 0.0) return ops::scale(completion, weights.lambda_com);
  if (!adversarial.attached())
    throw UsageError("joint loss: adversarial term missing while lambda_adv > 0");
  if (weights.lambda_com == 0.0) return ops::scale(adversarial, weights.lambda_adv);
  return ops::add(ops::scale(completion, weights.lambda_com),
                  ops::scale(adversarial, weights.lambda_adv));
}

}  // namespace pfnet::training
