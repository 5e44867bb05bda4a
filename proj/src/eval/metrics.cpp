#include "pfnet/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "pfnet/data/cloud_io.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/geometry/chamfer.hpp"

namespace pfnet::eval {

using data::CompletionSample;
using geometry::PointCloud;

DirectionalErrors directional_errors(const PointCloud& pred, const PointCloud& gt) {
  if (pred.empty() || gt.empty()) throw DomainError("directional errors need non-empty clouds");
  const auto terms = geometry::chamfer(pred, gt);
  return {terms.d_1to2, terms.d_2to1};
}

std::string_view mode_name(EvalMode mode) {
  return mode == EvalMode::overall ? "overall" : "missing";
}

EvalMode parse_mode(std::string_view name) {
  if (name == "overall") return EvalMode::overall;
  if (name == "missing") return EvalMode::missing;
  throw UsageError("unknown evaluation mode '" + std::string(name) +
                   "' (expected overall or missing)");
}

Predictor oracle_predictor() {
  return [](const CompletionSample& s) { return s.missing_gt; };
}

Predictor model_predictor(model::PFNet& net) {
  return [&net](const CompletionSample& s) {
    const std::size_t m = net.config().decoder.m;
    if (s.missing_gt.size() != m)
      throw ConfigError("checkpoint predicts M=" + std::to_string(m) + " points but the sample " +
                        "missing region has " + std::to_string(s.missing_gt.size()));
    return net.complete(s.partial).back();
  };
}

MetricReport evaluate(const Predictor& predictor, std::span<const CompletionSample> samples,
                      EvalMode mode) {
  if (samples.empty()) throw ConfigError("evaluation split is empty");
  struct Sums {
    std::size_t n = 0;
    double p2g = 0.0;
    double g2p = 0.0;
  };
  std::map<std::string, Sums> by_category;
  for (const auto& s : samples) {
    const PointCloud pred = predictor(s);
    const auto e = mode == EvalMode::missing
                       ? directional_errors(pred, s.missing_gt)
                       : directional_errors(geometry::concatenate(s.partial, pred), s.full);
    auto& sums = by_category[s.category];
    ++sums.n;
    sums.p2g += e.pred_to_gt;
    sums.g2p += e.gt_to_pred;
  }
  MetricReport report;
  report.mode = mode;
  report.mean.category = "mean";
  for (const auto& [name, sums] : by_category) {
    const double n = static_cast<double>(sums.n);
    CategoryMetrics row{name, sums.n, kReportScale * sums.p2g / n, kReportScale * sums.g2p / n};
    report.mean.n_samples += row.n_samples;
    report.mean.pred_to_gt += row.pred_to_gt;
    report.mean.gt_to_pred += row.gt_to_pred;
    report.categories.push_back(std::move(row));
  }
  const double k = static_cast<double>(report.categories.size());
  report.mean.pred_to_gt /= k;
  report.mean.gt_to_pred /= k;
  return report;
}

namespace {

std::string cell(const CategoryMetrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f / %.3f", m.pred_to_gt, m.gt_to_pred);
  return buf;
}

std::string padded(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string format_table(const MetricReport& report, std::string_view method) {
  std::size_t name_width = std::string_view("Category").size();
  for (const auto& c : report.categories) name_width = std::max(name_width, c.category.size());
  name_width += 2;

  std::string out = report.mode == EvalMode::overall
                        ? "Completion results of the overall point cloud"
                        : "Completion results of the missing point cloud";
  out += ". [Pred → GT error / GT → Pred error], scaled by 1000.\n";
  out += padded("Category", name_width) + std::string(method) + '\n';
  for (const auto& c : report.categories) out += padded(c.category, name_width) + cell(c) + '\n';
  out += padded("Mean", name_width) + cell(report.mean) + '\n';
  return out;
}

std::string format_csv(std::span<const MetricReport> reports) {
  std::string out = std::string(kReportCsvHeader) + '\n';
  auto line = [&out](const MetricReport& r, const CategoryMetrics& m) {
    out += std::string(mode_name(r.mode)) + ',' + m.category + ',' + std::to_string(m.n_samples) +
           ',' + data::format_double(m.pred_to_gt) + ',' + data::format_double(m.gt_to_pred) +
           '\n';
  };
  for (const auto& r : reports) {
    for (const auto& c : r.categories) line(r, c);
    line(r, r.mean);
  }
  return out;
}

}  // namespace pfnet::eval
