#pragma once

#include "madtwinnet/tensor.hpp"

#include <cstddef>
#include <cstdint>

namespace madt {

/// Per-frame encoder/decoder pair with a floor(N/2) bottleneck. Weights are
/// shared across frames.
struct DenoiserParams {
  Matrix w_enc;  // N x N''
  Matrix b_enc;  // 1 x N''
  Matrix w_dec;  // N'' x N
  Matrix b_dec;  // 1 x N

  static DenoiserParams zeros(std::size_t bins);
  static std::size_t bottleneck(std::size_t bins) { return bins / 2; }
};

struct DenoiserTrace {
  Matrix input;
  Matrix pre_enc;
  Matrix h_enc;
  Matrix pre_dec;
  Matrix filter;  // H_d
};

/// Rows are frames. Output = ReLU(ReLU(v W_enc + b_enc) W_dec + b_dec) * v.
Matrix denoise(const Matrix& v_masked, const DenoiserParams& params,
               DenoiserTrace* trace = nullptr);

/// Accumulates parameter gradients and returns d(loss)/d(v_masked).
Matrix denoise_backward(const DenoiserParams& params, const DenoiserTrace& trace,
                        const Matrix& d_out, DenoiserParams& grad);

/// Compares analytic gradients of generalized_kl(target || denoise(v)) with
/// central differences on a seeded 3 x 12 instance; returns the largest
/// relative error over all parameters.
double denoiser_gradient_check(std::uint64_t seed);

}  // namespace madt
