#pragma once

#include <functional>

#include "aapl/tensor.hpp"

namespace aapl {

/// Scalar-valued function of one tensor, usable both on and off tape.
using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the taped gradient of f at `point` against central finite
/// differences. Returns max over coordinates of
///   |analytic - numeric| / max(1, |analytic|).
double grad_check(const ScalarFn& f, const Tensor& point, double eps);

}  // namespace aapl
