#include "pfnet/tensor/ops.hpp"

#include <cblas.h>
#include <sched.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "pfnet/errors.hpp"

namespace pfnet {

namespace {

// OpenBLAS sizes its pool from the host core count, which oversubscribes
// containers restricted to fewer CPUs.
void limit_blas_threads() {
  static const bool done = [] {
    cpu_set_t set;
    if (sched_getaffinity(0, sizeof(set), &set) == 0)
      openblas_set_num_threads(std::max(1, CPU_COUNT(&set)));
    return true;
  }();
  (void)done;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> out,
          double beta) {
  limit_blas_threads();
  const auto lda = static_cast<blasint>(trans_a ? m : k);
  const auto ldb = static_cast<blasint>(trans_b ? k : n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<blasint>(m),
              static_cast<blasint>(n), static_cast<blasint>(k), 1.0, a.data(), lda, b.data(), ldb,
              beta, out.data(), static_cast<blasint>(n));
}

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape) + " vs " +
                     shape_to_string(b.shape));
}

}  // namespace

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.shape[1] != b.shape[0])
    throw ShapeError("matmul: inner dimensions differ for " + shape_to_string(a.shape) + " x " +
                     shape_to_string(b.shape));
  Tensor out(Shape{a.shape[0], b.shape[1]});
  gemm(false, false, a.shape[0], b.shape[1], a.shape[1], a.values, b.values, out.values);
  return out;
}

namespace ops {

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  Tensor out = matmul_values(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record("matmul", {a, b}, std::move(out), [ia, ib](Graph& g, std::size_t self) {
    const Tensor& av = g.value(ia);
    const Tensor& bv = g.value(ib);
    const std::size_t p = av.shape[0], q = av.shape[1], r = bv.shape[1];
    auto dout = g.grad(self);
    if (auto da = g.grad_buffer(ia); !da.empty()) gemm(false, true, p, q, r, dout, bv.values, da, 1.0);
    if (auto db = g.grad_buffer(ib); !db.empty()) gemm(true, false, q, r, p, av.values, dout, db, 1.0);
  });
}

Var linear(Var x, Var weight, Var bias) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "linear");
  require_matrix(wv, "linear");
  if (xv.shape[1] != wv.shape[0])
    throw ShapeError("linear: input " + shape_to_string(xv.shape) + " does not match weight " +
                     shape_to_string(wv.shape));
  const std::size_t rows = xv.shape[0], in = wv.shape[0], out_dim = wv.shape[1];
  if (bv.size() != out_dim)
    throw ShapeError("linear: bias " + shape_to_string(bv.shape) + " does not match weight " +
                     shape_to_string(wv.shape));
  Tensor out(Shape{rows, out_dim});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(bv.values.begin(), bv.values.end(), out.values.begin() + r * out_dim);
  gemm(false, false, rows, out_dim, in, xv.values, wv.values, out.values, 1.0);

  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return g.record("linear", {x, weight, bias}, std::move(out),
                  [ix, iw, ib, rows, in, out_dim](Graph& g, std::size_t self) {
                    auto dout = g.grad(self);
                    if (auto dx = g.grad_buffer(ix); !dx.empty())
                      gemm(false, true, rows, in, out_dim, dout, g.value(iw).values, dx, 1.0);
                    if (auto dw = g.grad_buffer(iw); !dw.empty())
                      gemm(true, false, in, out_dim, rows, g.value(ix).values, dout, dw, 1.0);
                    if (auto db = g.grad_buffer(ib); !db.empty()) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < out_dim; ++c) db[c] += dout[r * out_dim + c];
                    }
                  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("add", {a, b}, std::move(out), [ia, ib](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    for (std::size_t in : {ia, ib}) {
      if (auto d = g.grad_buffer(in); !d.empty())
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("sub", {a, b}, std::move(out), [ia, ib](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    if (auto d = g.grad_buffer(ia); !d.empty())
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
    if (auto d = g.grad_buffer(ib); !d.empty())
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= dout[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("mul", {a, b}, std::move(out), [ia, ib](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    if (auto d = g.grad_buffer(ia); !d.empty()) {
      const auto& bv = g.value(ib).values;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * bv[i];
    }
    if (auto d = g.grad_buffer(ib); !d.empty()) {
      const auto& av = g.value(ia).values;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values) v *= factor;
  const std::size_t ia = a.id();
  return a.graph().record("scale", {a}, std::move(out), [ia, factor](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * dout[i];
  });
}

Var add_rowwise(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  const std::size_t cols = xv.cols(), rows = xv.rows();
  if (rv.size() != cols)
    throw ShapeError("add_rowwise: row " + shape_to_string(rv.shape) + " does not match " +
                     shape_to_string(xv.shape));
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.values[r * cols + c] += rv.values[c];
  const std::size_t ix = x.id(), ir = row.id();
  return x.graph().record("add_rowwise", {x, row}, std::move(out),
                          [ix, ir, rows, cols](Graph& g, std::size_t self) {
                            auto dout = g.grad(self);
                            if (auto d = g.grad_buffer(ix); !d.empty())
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
                            if (auto d = g.grad_buffer(ir); !d.empty())
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c) d[c] += dout[r * cols + c];
                          });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id();
  return x.graph().record("relu", {x}, std::move(out), [ix](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ix);
    const auto& xv = g.value(ix).values;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (xv[i] > 0.0) d[i] += dout[i];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.values) {
    // Split on sign so exp never overflows.
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  const std::size_t ix = x.id();
  return x.graph().record("sigmoid", {x}, std::move(out), [ix](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ix);
    const auto& s = g.value(self).values;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * s[i] * (1.0 - s[i]);
  });
}

Var log(Var x) {
  Tensor out = x.value();
  for (double& v : out.values) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
    v = std::log(v);
  }
  const std::size_t ix = x.id();
  return x.graph().record("log", {x}, std::move(out), [ix](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ix);
    const auto& xv = g.value(ix).values;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] / xv[i];
  });
}

Var clamp(Var x, double lo, double hi, std::size_t* clamped_count) {
  Tensor out = x.value();
  std::size_t clamped = 0;
  for (double& v : out.values) {
    if (v < lo) {
      v = lo;
      ++clamped;
    } else if (v > hi) {
      v = hi;
      ++clamped;
    }
  }
  if (clamped_count) *clamped_count += clamped;
  const std::size_t ix = x.id();
  return x.graph().record("clamp", {x}, std::move(out), [ix, lo, hi](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ix);
    const auto& xv = g.value(ix).values;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (xv[i] >= lo && xv[i] <= hi) d[i] += dout[i];
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values) total += v;
  const std::size_t ix = x.id();
  return x.graph().record("sum", {x}, Tensor::scalar(total), [ix](Graph& g, std::size_t self) {
    const double dout = g.grad(self)[0];
    auto d = g.grad_buffer(ix);
    for (double& v : d) v += dout;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var reshape(Var x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  Tensor out(std::move(shape), x.value().values);
  const std::size_t ix = x.id();
  return x.graph().record("reshape", {x}, std::move(out), [ix](Graph& g, std::size_t self) {
    auto dout = g.grad(self);
    auto d = g.grad_buffer(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
  });
}

Var maxpool_groups(Var x, std::size_t groups) {
  const Tensor& xv = x.value();
  require_matrix(xv, "maxpool");
  const std::size_t rows = xv.shape[0], cols = xv.shape[1];
  if (groups == 0 || rows % groups != 0)
    throw ShapeError("maxpool: " + std::to_string(rows) + " rows cannot form " +
                     std::to_string(groups) + " equal groups");
  const std::size_t per = rows / groups;
  Tensor out(Shape{groups, cols});
  std::vector<std::size_t> argmax(groups * cols);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * per;
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = base;
      double best_value = xv.values[base * cols + c];
      for (std::size_t r = base + 1; r < base + per; ++r) {
        const double v = xv.values[r * cols + c];
        if (v > best_value) {
          best_value = v;
          best = r;
        }
      }
      out.values[gi * cols + c] = best_value;
      argmax[gi * cols + c] = best;
    }
  }
  const std::size_t ix = x.id();
  return x.graph().record("maxpool", {x}, std::move(out),
                          [ix, cols, argmax = std::move(argmax)](Graph& g, std::size_t self) {
                            auto dout = g.grad(self);
                            auto d = g.grad_buffer(ix);
                            for (std::size_t i = 0; i < argmax.size(); ++i)
                              d[argmax[i] * cols + i % cols] += dout[i];
                          });
}

Var maxpool_points(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.size() == 0)
    throw DomainError("maxpool_points: expected a non-empty [P x C] matrix, got " +
                      shape_to_string(xv.shape));
  const std::size_t cols = xv.shape[1];
  return reshape(maxpool_groups(x, 1), Shape{cols});
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != rows)
      throw ShapeError("concat_cols: row count mismatch " + shape_to_string(parts[0].shape()) +
                       " vs " + shape_to_string(p.shape()));
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].value().values;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.begin() + r * widths[k], widths[k], out.values.begin() + r * total + offset);
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts[0].graph().record(
      "concat_cols", parts, std::move(out), [ids, widths, rows, total](Graph& g, std::size_t self) {
        auto dout = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (auto d = g.grad_buffer(ids[k]); !d.empty())
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c)
                d[r * widths[k] + c] += dout[r * total + offset + c];
          offset += widths[k];
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<double> values;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != cols)
      throw ShapeError("concat_rows: column count mismatch " + shape_to_string(parts[0].shape()) +
                       " vs " + shape_to_string(p.shape()));
    rows += p.value().rows();
    values.insert(values.end(), p.value().values.begin(), p.value().values.end());
    ids.push_back(p.id());
  }
  return parts[0].graph().record("concat_rows", parts, Tensor(Shape{rows, cols}, std::move(values)),
                                 [ids](Graph& g, std::size_t self) {
                                   auto dout = g.grad(self);
                                   std::size_t offset = 0;
                                   for (std::size_t id : ids) {
                                     const std::size_t n = g.value(id).size();
                                     if (auto d = g.grad_buffer(id); !d.empty())
                                       for (std::size_t i = 0; i < n; ++i) d[i] += dout[offset + i];
                                     offset += n;
                                   }
                                 });
}

Var stack_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("stack_cols: no inputs");
  const std::size_t rows = parts[0].size();
  const std::size_t k = parts.size();
  Tensor out(Shape{rows, k});
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& src = parts[j].value().values;
    if (src.size() != rows)
      throw ShapeError("stack_cols: element count mismatch " + shape_to_string(parts[0].shape()) +
                       " vs " + shape_to_string(parts[j].shape()));
    for (std::size_t r = 0; r < rows; ++r) out.values[r * k + j] = src[r];
    ids.push_back(parts[j].id());
  }
  return parts[0].graph().record("stack_cols", parts, std::move(out),
                                 [ids, rows, k](Graph& g, std::size_t self) {
                                   auto dout = g.grad(self);
                                   for (std::size_t j = 0; j < k; ++j)
                                     if (auto d = g.grad_buffer(ids[j]); !d.empty())
                                       for (std::size_t r = 0; r < rows; ++r) d[r] += dout[r * k + j];
                                 });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_rows");
  if (begin >= end || end > xv.shape[0])
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_to_string(xv.shape));
  const std::size_t cols = xv.shape[1];
  Tensor out(Shape{end - begin, cols},
             std::vector<double>(xv.values.begin() + begin * cols, xv.values.begin() + end * cols));
  const std::size_t ix = x.id();
  return x.graph().record("slice_rows", {x}, std::move(out),
                          [ix, begin, cols](Graph& g, std::size_t self) {
                            auto dout = g.grad(self);
                            auto d = g.grad_buffer(ix);
                            for (std::size_t i = 0; i < dout.size(); ++i) d[begin * cols + i] += dout[i];
                          });
}

Var repeat_rows(Var x, std::size_t times) {
  const Tensor& xv = x.value();
  require_matrix(xv, "repeat_rows");
  if (times == 0) throw ShapeError("repeat_rows: repeat count must be positive");
  const std::size_t rows = xv.shape[0], cols = xv.shape[1];
  Tensor out(Shape{rows * times, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(xv.values.begin() + r * cols, cols, out.values.begin() + (r * times + t) * cols);
  const std::size_t ix = x.id();
  return x.graph().record("repeat_rows", {x}, std::move(out),
                          [ix, rows, cols, times](Graph& g, std::size_t self) {
                            auto dout = g.grad(self);
                            auto d = g.grad_buffer(ix);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t t = 0; t < times; ++t)
                                for (std::size_t c = 0; c < cols; ++c)
                                  d[r * cols + c] += dout[(r * times + t) * cols + c];
                          });
}

Var detach(Var x) { return x.graph().constant(x.value()); }

}  // namespace ops
}  // namespace pfnet
