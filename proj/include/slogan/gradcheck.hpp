#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slogan/tensor.hpp"

namespace slogan {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor index>[<entry>]" of the worst entry
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor; keeps near-zero gradients from producing huge ratios.
  double abs_floor = 1e-6;
};

// Compares analytic gradients of the scalar `f(x)` with central differences.
// Throws if f(x) is not finite.
GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                                  double tol, GradCheckOptions opts = {});

// Same check over several leaf tensors that `f` closes over. Their values are
// perturbed in place and restored; their grads are cleared before returning.
GradCheckReport finite_diff_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                         double tol, GradCheckOptions opts = {});

}  // namespace slogan
