#pragma once

#include <functional>
#include <vector>

#include "mgm/tensor.hpp"

namespace mgm::nn {

struct FdOptions {
  float h = 1e-3f;
  // |numeric| below this switches the element to absolute-error reporting
  // (relative error is meaningless against a vanishing reference slope).
  float near_zero = 1e-6f;
};

struct FdReport {
  // max over elements with |numeric| >= near_zero of |analytic-numeric| / |numeric|
  float max_rel_err = 0.0f;
  // max over remaining (near-zero-reference) elements of |analytic-numeric|
  float max_abs_err = 0.0f;
  std::size_t elements_checked = 0;

  bool within(float rel_tol, float abs_tol) const {
    return max_rel_err < rel_tol && max_abs_err < abs_tol;
  }
};

// Central-difference check of autodiff gradients. make_loss must rebuild
// the loss from the parameters' current values on every call (and must be
// deterministic). Gradients are taken once analytically, then each element
// of each parameter is perturbed by +/-h.
FdReport finite_difference_check(const std::function<Tensor()>& make_loss,
                                 const std::vector<Tensor>& params, FdOptions opt = {});

}  // namespace mgm::nn
