#pragma once

#include <cstddef>

#include "pfnet/geometry/point_cloud.hpp"
#include "pfnet/tensor/graph.hpp"

namespace pfnet::geometry {

struct ChamferTerms {
  double d_1to2 = 0.0;  // mean over s1 of the nearest squared distance into s2
  double d_2to1 = 0.0;
  double total = 0.0;
};

ChamferTerms chamfer(const PointCloud& s1, const PointCloud& s2);

// Differentiable batched Chamfer distance. `a` is [B*P x 3], `b` is [B*Q x 3];
// rows are split into `batch` equal consecutive clouds. Returns a [B] tensor of
// per-cloud totals. Gradients reach both inputs through the nearest matches
// (lowest index on ties).
Var chamfer_loss(Var a, Var b, std::size_t batch);

}  // namespace pfnet::geometry
