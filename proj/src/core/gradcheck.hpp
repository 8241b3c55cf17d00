#pragma once

#include <functional>

#include "nets.hpp"

namespace ls::num {

struct GradCheckReport {
  real max_rel_error = 0.0;
  std::string worst_param;
  long worst_index = -1;
  bool passed(real tolerance) const { return max_rel_error < tolerance; }
};

// Test hook: when set, the reported analytic gradient of every parameter's
// first entry is perturbed, so a correct checker must flag a failure.
void set_gradcheck_corruption(real delta);

// Compares tape gradients of the scalar-valued builder `f` against central
// finite differences (step 1e-4) for every tensor in `ps`. `f` must be a pure
// function of the parameter values.
GradCheckReport grad_check(const std::function<Var(Graph&)>& f, ParamStore& ps,
                           real fd_step = 1e-4);

}  // namespace ls::num
