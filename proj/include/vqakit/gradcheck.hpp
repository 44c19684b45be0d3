#pragma once

// Central finite-difference check of analytic input gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqakit/matrix.hpp"

namespace vqakit {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_input;  // max relative error per input matrix
};

// Relative error with an absolute floor so exactly-zero gradients do not
// divide by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// forward(inputs) -> Matrix, backward(inputs, cotangent) -> gradients, one
// per input. The scalar loss is sum(cotangent * forward(inputs)); an
// all-ones cotangent gives the plain sum of outputs.
template <class Forward, class Backward>
GradCheckResult grad_check(Forward&& forward, Backward&& backward, std::vector<Matrix> inputs,
                           const Matrix& cotangent, double eps = 1e-5) {
  auto loss = [&](const std::vector<Matrix>& in) {
    const Matrix out = forward(in);
    if (!out.all_finite()) throw NumericalError("non-finite value in forward output");
    cotangent.require_same(out, "grad_check cotangent");
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += cotangent.data()[i] * out.data()[i];
    return s;
  };
  const std::vector<Matrix> grads = backward(inputs, cotangent);
  if (grads.size() != inputs.size()) throw std::logic_error("backward returned wrong gradient count");
  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].require_same(grads[k], "gradient shape");
    if (!grads[k].all_finite()) throw NumericalError("non-finite analytic gradient for input " + std::to_string(k));
    double worst = 0.0;
    for (std::size_t e = 0; e < inputs[k].size(); ++e) {
      double& x = inputs[k].data()[e];
      const double saved = x;
      x = saved + eps;
      const double up = loss(inputs);
      x = saved - eps;
      const double down = loss(inputs);
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, relative_error(grads[k].data()[e], numeric));
    }
    res.per_input.push_back(worst);
    res.max_rel_error = std::max(res.max_rel_error, worst);
  }
  return res;
}

template <class Forward, class Backward>
GradCheckResult grad_check(Forward&& forward, Backward&& backward, std::vector<Matrix> inputs,
                           double eps = 1e-5) {
  const Matrix probe = forward(inputs);
  return grad_check(forward, backward, std::move(inputs), Matrix(probe.rows(), probe.cols(), 1.0), eps);
}

}  // namespace vqakit
