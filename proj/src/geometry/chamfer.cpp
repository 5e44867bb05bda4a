#include "pfnet/geometry/chamfer.hpp"

#include <string>
#include <vector>

#include "pfnet/errors.hpp"
#include "pfnet/geometry/nearest.hpp"

namespace pfnet::geometry {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ChamferTerms chamfer(const PointCloud& s1, const PointCloud& s2) {
  if (s1.empty() || s2.empty()) throw DomainError("chamfer: both clouds must be non-empty");
  ChamferTerms t;
  t.d_1to2 = mean_of(nearest_squared(s1, s2));
  t.d_2to1 = mean_of(nearest_squared(s2, s1));
  t.total = t.d_1to2 + t.d_2to1;
  return t;
}

Var chamfer_loss(Var a, Var b, std::size_t batch) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || av.shape[1] != 3 || bv.rank() != 2 || bv.shape[1] != 3)
    throw ShapeError("chamfer_loss: inputs must be [R x 3], got " + shape_to_string(av.shape) +
                     " and " + shape_to_string(bv.shape));
  if (batch == 0 || av.shape[0] % batch != 0 || bv.shape[0] % batch != 0)
    throw ShapeError("chamfer_loss: row counts " + std::to_string(av.shape[0]) + " and " +
                     std::to_string(bv.shape[0]) + " do not split into " + std::to_string(batch) +
                     " clouds");
  const std::size_t p = av.shape[0] / batch, q = bv.shape[0] / batch;

  // match_ab[i]: global row of b nearest to row i of a; and the reverse.
  std::vector<std::size_t> match_ab(av.shape[0]), match_ba(bv.shape[0]);
  Tensor out(Shape{batch});
  for (std::size_t k = 0; k < batch; ++k) {
    const PointCloud ca = PointCloud::from_rows(av, k * p, p);
    const PointCloud cb = PointCloud::from_rows(bv, k * q, q);
    const NearestResult ab = nearest(ca, cb);
    const NearestResult ba = nearest(cb, ca);
    for (std::size_t i = 0; i < p; ++i) match_ab[k * p + i] = k * q + ab.index[i];
    for (std::size_t j = 0; j < q; ++j) match_ba[k * q + j] = k * p + ba.index[j];
    out.values[k] = mean_of(ab.sq_dist) + mean_of(ba.sq_dist);
  }

  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(
      "chamfer", {a, b}, std::move(out),
      [ia, ib, p, q, match_ab = std::move(match_ab), match_ba = std::move(match_ba)](
          Graph& g, std::size_t self) {
        auto dout = g.grad(self);
        const auto& av = g.value(ia).values;
        const auto& bv = g.value(ib).values;
        auto da = g.grad_buffer(ia);
        auto db = g.grad_buffer(ib);
        for (std::size_t i = 0; i < match_ab.size(); ++i) {
          const std::size_t j = match_ab[i];
          const double w = 2.0 * dout[i / p] / static_cast<double>(p);
          for (std::size_t c = 0; c < 3; ++c) {
            const double diff = w * (av[i * 3 + c] - bv[j * 3 + c]);
            if (!da.empty()) da[i * 3 + c] += diff;
            if (!db.empty()) db[j * 3 + c] -= diff;
          }
        }
        for (std::size_t j = 0; j < match_ba.size(); ++j) {
          const std::size_t i = match_ba[j];
          const double w = 2.0 * dout[j / q] / static_cast<double>(q);
          for (std::size_t c = 0; c < 3; ++c) {
            const double diff = w * (bv[j * 3 + c] - av[i * 3 + c]);
            if (!db.empty()) db[j * 3 + c] += diff;
            if (!da.empty()) da[i * 3 + c] -= diff;
          }
        }
      });
}

}  // namespace pfnet::geometry
