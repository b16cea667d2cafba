#pragma once

#include "madtwinnet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace madt {

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Gradients smaller than this are compared in absolute terms. With h = 1e-5
// and a loss of order 100, rounding alone puts ~1e-9 of noise on every
// central difference, so entries below 1e-4 cannot be resolved to 1e-4.
inline constexpr double kRelativeErrorFloor = 1e-4;

/// Central differences of `loss()` with respect to every entry of `param`,
/// perturbed in place and restored afterwards.
template <class Loss>
Matrix central_difference(Matrix& param, Loss&& loss, double step = kFiniteDifferenceStep) {
  Matrix numeric(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    double& x = param.data()[i];
    const double saved = x;
    x = saved + step;
    const double up = loss(param);
    x = saved - step;
    const double down = loss(param);
    x = saved;
    numeric.data()[i] = (up - down) / (2.0 * step);
  }
  return numeric;
}

inline double relative_error(double analytic, double numeric,
                             double floor = kRelativeErrorFloor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

inline double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                                 double floor = kRelativeErrorFloor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic.data()[i], numeric.data()[i], floor));
  }
  return worst;
}

}  // namespace madt
