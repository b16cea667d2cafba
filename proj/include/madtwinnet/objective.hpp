#pragma once

#include "madtwinnet/tensor.hpp"

namespace madt {

/// Floor inside the logarithm of the divergence, applied to both arguments.
inline constexpr double kKlEpsilon = 1e-6;

/// Generalized KL divergence between non-negative matrices:
///   sum a * ln(max(a, eps) / max(b, eps)) - a + b, with 0 * ln(.) = 0.
/// Throws std::invalid_argument on shape mismatch or negative entries.
double generalized_kl(const Matrix& target, const Matrix& estimate);

/// Gradient of generalized_kl with respect to the estimate: 1 - a / b where
/// b > eps, and 1 below the floor.
Matrix generalized_kl_grad(const Matrix& target, const Matrix& estimate);

}  // namespace madt
