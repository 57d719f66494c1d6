#pragma once

// Central finite-difference oracle for tape gradients. Test-only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "flowvgae/numerics/tape.hpp"

namespace flowvgae::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "param[i]" of the worst entry
  std::size_t checked = 0;
};

/// loss_fn records a scalar loss on the given tape, reading params through
/// tape.input(). The oracle never looks at the tape's backward rules.
inline GradCheckResult gradcheck(
    const std::vector<numerics::Tensor*>& params,
    const std::function<numerics::Var(numerics::Tape&)>& loss_fn, double h = 1e-5,
    double denom_floor = 1e-6) {
  for (auto* p : params) p->set_requires_grad(true);
  {
    numerics::Tape tape;
    tape.backward(loss_fn(tape));
  }
  auto eval = [&] {
    numerics::Tape tape;
    return tape.value(loss_fn(tape)).item();
  };
  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    for (std::size_t k = 0; k < p->numel(); ++k) {
      const double orig = (*p)[k];
      (*p)[k] = orig + h;
      const double up = eval();
      (*p)[k] = orig - h;
      const double down = eval();
      (*p)[k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad()[k];
      const double abs_err = std::abs(numeric - analytic);
      const double rel =
          abs_err / std::max({std::abs(numeric), std::abs(analytic), denom_floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = "param" + std::to_string(pi) + "[" + std::to_string(k) + "]";
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace flowvgae::testing
