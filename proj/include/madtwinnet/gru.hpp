#pragma once

#include "madtwinnet/tensor.hpp"

#include <cstddef>

namespace madt {

/// Gated recurrent unit with PyTorch gate layout. Gate blocks along the
/// column axis are ordered (reset, update, candidate):
///
///   r  = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
///   z  = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
///   n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
///   h' = (1 - z) * n + z * h
struct GruParams {
  Matrix w_input;   // input x 3H
  Matrix w_hidden;  // H x 3H
  Matrix b_input;   // 1 x 3H
  Matrix b_hidden;  // 1 x 3H

  static GruParams zeros(std::size_t input, std::size_t hidden);

  Eigen::Index input_size() const { return w_input.rows(); }
  Eigen::Index hidden_size() const { return w_hidden.rows(); }
};

/// Per-step activations kept for the backward pass.
struct GruTrace {
  FrameSeq x, h_prev, r, z, n, hn;
};

/// Runs the cell over `x` from a zero initial state. Returns every hidden state.
FrameSeq gru_forward(const GruParams& p, const FrameSeq& x, GruTrace* trace = nullptr);

/// Back-propagates d(loss)/d(h_t) for every step; accumulates parameter
/// gradients into `grad` and returns d(loss)/d(x_t).
FrameSeq gru_backward(const GruParams& p, const GruTrace& trace, const FrameSeq& d_h,
                      GruParams& grad);

}  // namespace madt
