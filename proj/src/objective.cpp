#include "madtwinnet/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace madt {
namespace {

void check_inputs(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("generalized_kl: shape mismatch");
  }
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any()) {
    throw std::invalid_argument("generalized_kl: negative entries");
  }
}

}  // namespace

double generalized_kl(const Matrix& target, const Matrix& estimate) {
  check_inputs(target, estimate);
  double total = 0.0;
  const double* a = target.data();
  const double* b = estimate.data();
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    // 0 * ln(0) = 0; otherwise both sides are floored at epsilon.
    if (a[i] > 0.0) {
      total += a[i] * std::log(std::max(a[i], kKlEpsilon) / std::max(b[i], kKlEpsilon));
    }
    total += b[i] - a[i];
  }
  return total;
}

Matrix generalized_kl_grad(const Matrix& target, const Matrix& estimate) {
  check_inputs(target, estimate);
  // Below the floor the log term is constant in the estimate.
  return (estimate.array() > kKlEpsilon)
      .select(1.0 - target.array() / estimate.array(), 1.0)
      .matrix();
}

}  // namespace madt
