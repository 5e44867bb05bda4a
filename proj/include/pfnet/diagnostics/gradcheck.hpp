#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pfnet/tensor/adam.hpp"
#include "pfnet/tensor/graph.hpp"

namespace pfnet::diagnostics {

struct GradcheckOptions {
  double step = 1e-5;        // central difference step h
  double tolerance = 1e-4;   // on the per-element relative error
  // Denominator floor of the relative error: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Elements failing at `step` are re-measured at step / 10 and step / 100;
  // a difference quotient straddling a ReLU, max or nearest-match switch is
  // the usual cause and shrinks with h.
  bool refine = true;
  // Checks at most this many elements per tensor (evenly strided); 0 = all.
  std::size_t max_elements_per_tensor = 0;
};

struct GradcheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::string worst_element;  // "tensor[index]"
  std::size_t n_checked = 0;
  std::size_t n_refined = 0;
  bool passed = true;
};

// `loss` builds a fresh graph reading the tensors in `inputs` (typically via
// Graph::parameter) and returns a scalar. Analytic gradients come from one
// backward pass; numeric ones from central differences on every element.
GradcheckResult gradcheck(const std::string& name, const std::vector<NamedTensor>& inputs,
                          const std::function<Var(Graph&)>& loss,
                          const GradcheckOptions& options = {});

// Every differentiable tensor operation on `trials` random small inputs each.
std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, std::size_t trials = 20,
                                           const GradcheckOptions& options = {});

// The joint generator loss and the discriminator loss of a network with all
// widths divided by 16, M1=2, M2=4, M=8, 32-point partial inputs, batch 2.
std::vector<GradcheckResult> model_gradchecks(std::uint64_t seed,
                                              const GradcheckOptions& options = {});

}  // namespace pfnet::diagnostics
