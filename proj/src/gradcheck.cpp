#include "slogan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "slogan/error.hpp"

namespace slogan {

GradCheckReport finite_diff_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                         double tol, GradCheckOptions opts) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  Tensor root = f();
  if (root.numel() != 1) throw ShapeError("finite_diff_check: f must return a scalar");
  if (!std::isfinite(static_cast<double>(root.item())))
    throw Error("finite_diff_check: f(x) is not finite");
  root.backward();

  GradCheckReport report;
  NoGradGuard guard;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    std::vector<real> analytic = p.has_grad() ? std::vector<real>(p.grad().begin(), p.grad().end())
                                              : std::vector<real>(p.numel(), 0);
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const real saved = values[i];
      values[i] = saved + static_cast<real>(opts.step);
      const double up = f().item();
      values[i] = saved - static_cast<real>(opts.step);
      const double down = f().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw Error("finite_diff_check: f is not finite near x");
      const double numeric = (up - down) / (2 * opts.step);
      const double a = static_cast<double>(analytic[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) report.worst = std::to_string(t) + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto& p : params) p.clear_grad();
  report.passed = report.max_rel_error < tol;
  return report;
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                                  double tol, GradCheckOptions opts) {
  Tensor leaf = x.detach();
  return finite_diff_check_params([&] { return f(leaf); }, {leaf}, tol, opts);
}

}  // namespace slogan
