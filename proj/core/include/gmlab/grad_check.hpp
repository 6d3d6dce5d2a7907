#pragma once

#include <functional>
#include <vector>

#include "gmlab/tensor.hpp"

namespace gmlab {

/// Max over coordinates of |analytic - numeric| / max(1, |numeric|),
/// numeric gradient via central finite differences with step `eps`.
/// `f` must map a leaf tensor to a scalar and be deterministic; a value
/// mismatch between two evaluations at the same point is an error.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double eps = 1e-5);

/// Same check against a set of named parameters mutated in place.
/// `f` must read the parameters through the tape on every call.
double grad_check_params(const std::function<Tensor()>& f,
                         const std::vector<Tensor>& params, double eps = 1e-5);

}  // namespace gmlab
