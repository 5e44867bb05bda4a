#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pfnet/data/holes.hpp"
#include "pfnet/geometry/point_cloud.hpp"
#include "pfnet/model/pfnet.hpp"

namespace pfnet::eval {

struct DirectionalErrors {
  double pred_to_gt = 0.0;  // mean over pred of the nearest squared distance into gt
  double gt_to_pred = 0.0;
};

DirectionalErrors directional_errors(const geometry::PointCloud& pred,
                                     const geometry::PointCloud& gt);

enum class EvalMode { overall, missing };

std::string_view mode_name(EvalMode mode);
EvalMode parse_mode(std::string_view name);

inline constexpr double kReportScale = 1000.0;

// Errors are stored already multiplied by kReportScale.
struct CategoryMetrics {
  std::string category;
  std::size_t n_samples = 0;
  double pred_to_gt = 0.0;
  double gt_to_pred = 0.0;
};

struct MetricReport {
  EvalMode mode = EvalMode::missing;
  std::vector<CategoryMetrics> categories;  // sorted by name
  CategoryMetrics mean;                     // unweighted across categories
};

// Predicts the missing region of a sample.
using Predictor = std::function<geometry::PointCloud(const data::CompletionSample&)>;

// Returns the ground-truth missing region.
Predictor oracle_predictor();

// Runs the network in eval mode; throws ConfigError when a sample's missing
// region does not have the M points the network predicts.
Predictor model_predictor(model::PFNet& net);

// Missing mode compares the prediction with missing_gt; overall mode compares
// partial + prediction with the full cloud. Per-category sample means, then
// the unweighted mean across categories.
MetricReport evaluate(const Predictor& predictor, std::span<const data::CompletionSample> samples,
                      EvalMode mode);

// Caption, header, one row per category and a Mean row, each cell
// "pred_to_gt / gt_to_pred" with three decimals.
std::string format_table(const MetricReport& report, std::string_view method = "PF-Net");

inline constexpr const char* kReportCsvHeader =
    "mode,category,n_samples,pred_to_gt_x1000,gt_to_pred_x1000";

// Header plus one line per category and a final "mean" line per report.
std::string format_csv(std::span<const MetricReport> reports);

}  // namespace pfnet::eval
