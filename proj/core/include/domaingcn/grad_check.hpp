#pragma once

#include <cstddef>
#include <functional>

#include "domaingcn/autodiff.hpp"

namespace domaingcn {

// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double RelativeError(double analytic, double numeric);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;  // row-major coordinate
  Tensor analytic;
  Tensor numeric;
};

// A scalar function written against the tape; `x` is the point under test.
using TapeFunction = std::function<Var(Tape&, Var x)>;

// Compares the tape gradient of f at `point` with central differences of
// step h. A NaN result means f was not finite somewhere near the point.
GradCheckResult GradCheck(const TapeFunction& f, const Tensor& point, double h = 1e-5);

// Central difference of a plain scalar function along every coordinate.
Tensor NumericGradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                       double h = 1e-5);

}  // namespace domaingcn
