#include "domaingcn/grad_check.hpp"

#include <cmath>
#include <limits>

namespace domaingcn {

double RelativeError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

Tensor NumericGradient(const std::function<double(const Tensor&)>& f, const Tensor& point,
                       double h) {
  Tensor numeric(point.rows(), point.cols());
  Tensor probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + h;
    const double plus = f(probe);
    probe.data()[i] = original - h;
    const double minus = f(probe);
    probe.data()[i] = original;
    numeric.data()[i] = (plus - minus) / (2.0 * h);
  }
  return numeric;
}

GradCheckResult GradCheck(const TapeFunction& f, const Tensor& point, double h) {
  GradCheckResult result;
  {
    Tape tape;
    Var x = tape.Leaf(point, true);
    Var y = f(tape, x);
    tape.Backward(y);
    result.analytic = tape.grad(x);
  }
  result.numeric = NumericGradient(
      [&f](const Tensor& p) {
        Tape tape;
        Var x = tape.Constant(p);
        return f(tape, x).value()(0, 0);
      },
      point, h);
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double err = RelativeError(result.analytic.data()[i], result.numeric.data()[i]);
    if (std::isnan(err)) {
      result.max_relative_error = std::numeric_limits<double>::quiet_NaN();
      result.worst_index = static_cast<std::size_t>(i);
      break;
    }
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = static_cast<std::size_t>(i);
    }
  }
  return result;
}

}  // namespace domaingcn
