#include "pfnet/diagnostics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "pfnet/data/dataset.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/geometry/chamfer.hpp"
#include "pfnet/model/pfnet.hpp"
#include "pfnet/tensor/batchnorm.hpp"
#include "pfnet/tensor/ops.hpp"
#include "pfnet/training/losses.hpp"
#include "pfnet/training/trainer.hpp"

namespace pfnet::diagnostics {

namespace {

double evaluate_loss(const std::function<Var(Graph&)>& loss) {
  Graph g;
  return loss(g).item();
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(double& x, double h, const std::function<Var(Graph&)>& loss) {
  const double saved = x;
  x = saved + h;
  const double plus = evaluate_loss(loss);
  x = saved - h;
  const double minus = evaluate_loss(loss);
  x = saved;
  return (plus - minus) / (2.0 * h);
}

}  // namespace

GradcheckResult gradcheck(const std::string& name, const std::vector<NamedTensor>& inputs,
                          const std::function<Var(Graph&)>& loss,
                          const GradcheckOptions& options) {
  for (const auto& in : inputs) in.tensor->clear_grad();
  {
    Graph g;
    const Var l = loss(g);
    if (l.size() != 1) throw ShapeError("gradcheck '" + name + "': loss is not a scalar");
    g.backward(l);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& in : inputs) {
    analytic.push_back(in.tensor->grad ? *in.tensor->grad
                                       : std::vector<double>(in.tensor->size(), 0.0));
    in.tensor->clear_grad();
  }

  GradcheckResult result;
  result.name = name;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = *inputs[i].tensor;
    const std::size_t n = t.size();
    const std::size_t stride =
        options.max_elements_per_tensor == 0 || n <= options.max_elements_per_tensor
            ? 1
            : (n + options.max_elements_per_tensor - 1) / options.max_elements_per_tensor;
    for (std::size_t e = 0; e < n; e += stride) {
      const double a = analytic[i][e];
      double err = relative_error(a, central_difference(t.values[e], options.step, loss),
                                  options.floor);
      if (err >= options.tolerance && options.refine) {
        ++result.n_refined;
        for (double h : {options.step / 10.0, options.step / 100.0}) {
          err = std::min(err, relative_error(a, central_difference(t.values[e], h, loss),
                                             options.floor));
          if (err < options.tolerance) break;
        }
      }
      ++result.n_checked;
      if (err > result.max_relative_error || !std::isfinite(err)) {
        result.max_relative_error = std::isfinite(err) ? err : INFINITY;
        result.worst_element = inputs[i].name + "[" + std::to_string(e) + "]";
      }
    }
  }
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

namespace {

using Rng = std::mt19937_64;

// One randomized instance of an op check: owned inputs plus the loss.
struct Case {
  std::deque<Tensor> tensors;
  std::vector<NamedTensor> inputs;
  std::function<Var(Graph&)> loss;

  Tensor& input(const std::string& name, Tensor t) {
    tensors.push_back(std::move(t));
    inputs.push_back({name, &tensors.back()});
    return tensors.back();
  }
  Tensor& fixed(Tensor t) {
    tensors.push_back(std::move(t));
    return tensors.back();
  }
};

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values) v = u(rng);
  return t;
}

// Values with magnitude in [0.1, 1] and random sign, away from the ReLU kink.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.values)
    if (flip(rng)) v = -v;
  return t;
}

// Distinct values in [-1, 1], pairwise at least 1/n apart, so a max never ties.
Tensor separated(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  const std::size_t n = t.values.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end(), rng);
  const double spacing = 2.0 / static_cast<double>(n);
  std::uniform_real_distribution<double> jitter(-0.25 * spacing, 0.25 * spacing);
  for (std::size_t i = 0; i < n; ++i)
    t.values[i] = -1.0 + spacing * (static_cast<double>(rank[i]) + 0.5) + jitter(rng);
  return t;
}

// Random-weighted sum, so that every output element carries its own weight.
Var weighted_sum(Graph& g, Var out, const Tensor& weights) {
  return ops::sum(ops::mul(out, g.constant(weights)));
}

using CaseBuilder = std::function<void(Case&, Rng&)>;

// Adds the projection weights for an output of the given shape and wraps `f`.
void finish(Case& c, Rng& rng, const Shape& out_shape, std::function<Var(Graph&)> f) {
  const Tensor& w = c.fixed(random_tensor(out_shape, rng, 0.5, 1.5));
  c.loss = [f = std::move(f), &w](Graph& g) { return weighted_sum(g, f(g), w); };
}

std::vector<std::pair<std::string, CaseBuilder>> op_cases() {
  std::vector<std::pair<std::string, CaseBuilder>> cases;
  auto add_case = [&cases](std::string name, CaseBuilder b) {
    cases.emplace_back(std::move(name), std::move(b));
  };

  add_case("matmul", [](Case& c, Rng& rng) {
    const std::size_t p = dim(rng), q = dim(rng), r = dim(rng);
    Tensor& a = c.input("a", random_tensor({p, q}, rng));
    Tensor& b = c.input("b", random_tensor({q, r}, rng));
    finish(c, rng, {p, r}, [&a, &b](Graph& g) { return ops::matmul(g.parameter(a), g.parameter(b)); });
  });
  add_case("linear", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng), in = dim(rng), out = dim(rng);
    Tensor& x = c.input("x", random_tensor({r, in}, rng));
    Tensor& w = c.input("weight", random_tensor({in, out}, rng));
    Tensor& b = c.input("bias", random_tensor({out}, rng));
    finish(c, rng, {r, out}, [&x, &w, &b](Graph& g) {
      return ops::linear(g.parameter(x), g.parameter(w), g.parameter(b));
    });
  });
  for (const char* name : {"add", "sub", "mul"}) {
    add_case(name, [name = std::string(name)](Case& c, Rng& rng) {
      const Shape s{dim(rng), dim(rng)};
      Tensor& a = c.input("a", random_tensor(s, rng));
      Tensor& b = c.input("b", random_tensor(s, rng));
      finish(c, rng, s, [&a, &b, name](Graph& g) {
        const Var va = g.parameter(a), vb = g.parameter(b);
        if (name == "add") return ops::add(va, vb);
        if (name == "sub") return ops::sub(va, vb);
        return ops::mul(va, vb);
      });
    });
  }
  add_case("fan_out", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor& a = c.input("a", random_tensor(s, rng));
    finish(c, rng, s, [&a](Graph& g) {
      const Var v = g.parameter(a);
      return ops::mul(ops::add(v, v), v);
    });
  });
  add_case("scale", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor& a = c.input("a", random_tensor(s, rng));
    const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    finish(c, rng, s, [&a, factor](Graph& g) { return ops::scale(g.parameter(a), factor); });
  });
  add_case("add_rowwise", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng), cols = dim(rng);
    Tensor& x = c.input("x", random_tensor({r, cols}, rng));
    Tensor& row = c.input("row", random_tensor({cols}, rng));
    finish(c, rng, {r, cols}, [&x, &row](Graph& g) {
      return ops::add_rowwise(g.parameter(x), g.parameter(row));
    });
  });
  add_case("relu", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor& x = c.input("x", away_from_zero(s, rng));
    finish(c, rng, s, [&x](Graph& g) { return ops::relu(g.parameter(x)); });
  });
  add_case("sigmoid", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor& x = c.input("x", random_tensor(s, rng, -3.0, 3.0));
    finish(c, rng, s, [&x](Graph& g) { return ops::sigmoid(g.parameter(x)); });
  });
  add_case("log", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor& x = c.input("x", random_tensor(s, rng, 0.5, 2.0));
    finish(c, rng, s, [&x](Graph& g) { return ops::log(g.parameter(x)); });
  });
  add_case("clamp", [](Case& c, Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    Tensor t = random_tensor(s, rng);
    for (double& v : t.values)
      if (std::abs(std::abs(v) - 0.5) < 0.05) v *= 0.8;
    Tensor& x = c.input("x", std::move(t));
    finish(c, rng, s, [&x](Graph& g) { return ops::clamp(g.parameter(x), -0.5, 0.5); });
  });
  add_case("sum", [](Case& c, Rng& rng) {
    Tensor& x = c.input("x", random_tensor({dim(rng), dim(rng)}, rng));
    finish(c, rng, Shape{}, [&x](Graph& g) { return ops::sum(g.parameter(x)); });
  });
  add_case("mean", [](Case& c, Rng& rng) {
    Tensor& x = c.input("x", random_tensor({dim(rng), dim(rng)}, rng));
    finish(c, rng, Shape{}, [&x](Graph& g) { return ops::mean(g.parameter(x)); });
  });
  add_case("reshape", [](Case& c, Rng& rng) {
    const std::size_t p = dim(rng), q = dim(rng);
    Tensor& x = c.input("x", random_tensor({p, q}, rng));
    finish(c, rng, {q, p}, [&x, p, q](Graph& g) { return ops::reshape(g.parameter(x), {q, p}); });
  });
  add_case("maxpool_points", [](Case& c, Rng& rng) {
    const std::size_t p = dim(rng, 1, 6), cols = dim(rng);
    Tensor& x = c.input("x", separated({p, cols}, rng));
    finish(c, rng, {cols}, [&x](Graph& g) { return ops::maxpool_points(g.parameter(x)); });
  });
  add_case("maxpool_groups", [](Case& c, Rng& rng) {
    const std::size_t groups = dim(rng, 1, 3), p = dim(rng), cols = dim(rng);
    Tensor& x = c.input("x", separated({groups * p, cols}, rng));
    finish(c, rng, {groups, cols},
           [&x, groups](Graph& g) { return ops::maxpool_groups(g.parameter(x), groups); });
  });
  add_case("concat_cols", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng), c1 = dim(rng), c2 = dim(rng);
    Tensor& a = c.input("a", random_tensor({r, c1}, rng));
    Tensor& b = c.input("b", random_tensor({r, c2}, rng));
    finish(c, rng, {r, c1 + c2}, [&a, &b](Graph& g) {
      return ops::concat_cols({g.parameter(a), g.parameter(b)});
    });
  });
  add_case("concat_rows", [](Case& c, Rng& rng) {
    const std::size_t r1 = dim(rng), r2 = dim(rng), cols = dim(rng);
    Tensor& a = c.input("a", random_tensor({r1, cols}, rng));
    Tensor& b = c.input("b", random_tensor({r2, cols}, rng));
    finish(c, rng, {r1 + r2, cols}, [&a, &b](Graph& g) {
      return ops::concat_rows({g.parameter(a), g.parameter(b)});
    });
  });
  add_case("stack_cols", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng), cols = dim(rng);
    Tensor& a = c.input("a", random_tensor({r, cols}, rng));
    Tensor& b = c.input("b", random_tensor({r, cols}, rng));
    Tensor& d = c.input("c", random_tensor({r, cols}, rng));
    finish(c, rng, {r * cols, 3}, [&a, &b, &d](Graph& g) {
      return ops::stack_cols({g.parameter(a), g.parameter(b), g.parameter(d)});
    });
  });
  add_case("slice_rows", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng, 2, 6), cols = dim(rng);
    const std::size_t begin = dim(rng, 0, r - 1);
    const std::size_t end = dim(rng, begin + 1, r);
    Tensor& x = c.input("x", random_tensor({r, cols}, rng));
    finish(c, rng, {end - begin, cols},
           [&x, begin, end](Graph& g) { return ops::slice_rows(g.parameter(x), begin, end); });
  });
  add_case("repeat_rows", [](Case& c, Rng& rng) {
    const std::size_t r = dim(rng), cols = dim(rng), times = dim(rng);
    Tensor& x = c.input("x", random_tensor({r, cols}, rng));
    finish(c, rng, {r * times, cols},
           [&x, times](Graph& g) { return ops::repeat_rows(g.parameter(x), times); });
  });
  for (Mode mode : {Mode::train, Mode::eval}) {
    add_case(mode == Mode::train ? "batchnorm_train" : "batchnorm_eval",
             [mode](Case& c, Rng& rng) {
               const std::size_t b = dim(rng, 2, 6), channels = dim(rng);
               Tensor& x = c.input("x", random_tensor({b, channels}, rng, -2.0, 2.0));
               Tensor& gamma = c.input("gamma", random_tensor({channels}, rng, 0.5, 1.5));
               Tensor& beta = c.input("beta", random_tensor({channels}, rng));
               auto stats = std::make_shared<BatchNormStats>(channels);
               stats->running_mean = random_tensor({channels}, rng);
               stats->running_var = random_tensor({channels}, rng, 0.5, 2.0);
               finish(c, rng, {b, channels}, [&x, &gamma, &beta, stats, mode](Graph& g) {
                 return ops::batchnorm(g.parameter(x), g.parameter(gamma), g.parameter(beta),
                                       *stats, mode, false);
               });
             });
  }
  add_case("chamfer", [](Case& c, Rng& rng) {
    const std::size_t batch = dim(rng, 1, 3), p = dim(rng, 1, 6), q = dim(rng, 1, 6);
    Tensor& a = c.input("a", random_tensor({batch * p, 3}, rng));
    Tensor& b = c.input("b", random_tensor({batch * q, 3}, rng));
    finish(c, rng, {batch}, [&a, &b, batch](Graph& g) {
      return geometry::chamfer_loss(g.parameter(a), g.parameter(b), batch);
    });
  });
  return cases;
}

}  // namespace

std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, std::size_t trials,
                                           const GradcheckOptions& options) {
  std::vector<GradcheckResult> results;
  Rng rng(seed);
  for (const auto& [name, build] : op_cases()) {
    GradcheckResult total;
    total.name = name;
    for (std::size_t t = 0; t < trials; ++t) {
      Case c;
      build(c, rng);
      const auto r = gradcheck(name, c.inputs, c.loss, options);
      total.n_checked += r.n_checked;
      total.n_refined += r.n_refined;
      if (r.max_relative_error >= total.max_relative_error) {
        total.max_relative_error = r.max_relative_error;
        total.worst_element = "trial " + std::to_string(t) + " " + r.worst_element;
      }
    }
    total.passed = total.max_relative_error < options.tolerance;
    results.push_back(std::move(total));
  }
  return results;
}

std::vector<GradcheckResult> model_gradchecks(std::uint64_t seed,
                                              const GradcheckOptions& options) {
  data::DatasetSpec spec;
  spec.n_points = 40;
  spec.missing_ratio = 0.2;
  spec.shapes_per_category = 1;
  spec.train_fraction = 1.0;
  spec.seed = seed;
  const auto dataset = data::generate_dataset(spec);
  const auto all = dataset.split("train");
  const std::vector<data::CompletionSample> samples(all.begin(), all.begin() + 2);

  auto config = model::ModelConfig::paper(spec.missing_points()).scaled_down(16);
  config.decoder.m1 = 2;
  config.decoder.m2 = 4;
  model::PFNet net(config, seed);

  std::vector<training::MultiStageTargets> targets;
  std::vector<geometry::PointCloud> partials, reals;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    targets.push_back(training::make_targets(samples[i].missing_gt, config.decoder.m1,
                                             config.decoder.m2, training::target_seed(i)));
    partials.push_back(samples[i].partial);
    reals.push_back(samples[i].missing_gt);
  }
  const Tensor real = geometry::stack_clouds(reals);
  const std::size_t batch = samples.size();
  const training::LossWeights weights;

  std::vector<GradcheckResult> results;
  results.push_back(gradcheck(
      "generator_joint_loss", net.generator_parameters(),
      [&](Graph& g) {
        const auto gen = net.generate(g, partials, Mode::train, model::Binding::trainable);
        const auto com = training::completion_loss(g, gen.decoder, targets, weights);
        const Var both = ops::concat_rows({g.constant(real), gen.decoder.detail});
        const auto d = net.discriminate(g, both, 2 * batch, Mode::train, model::Binding::frozen);
        const Var adv =
            training::generator_adversarial_loss(ops::slice_rows(d.probability, batch, 2 * batch));
        return training::joint_generator_loss(com.total, adv, weights);
      },
      options));

  Tensor fake;
  {
    Graph g;
    fake = net.generate(g, partials, Mode::train, model::Binding::frozen).decoder.detail.value();
  }
  results.push_back(gradcheck(
      "discriminator_loss", net.discriminator_parameters(),
      [&](Graph& g) {
        const Var both = ops::concat_rows({g.constant(real), g.constant(fake)});
        const auto d =
            net.discriminate(g, both, 2 * batch, Mode::train, model::Binding::trainable);
        return training::discriminator_loss(ops::slice_rows(d.probability, 0, batch),
                                            ops::slice_rows(d.probability, batch, 2 * batch));
      },
      options));
  return results;
}

}  // namespace pfnet::diagnostics
