#pragma once

#include "madtwinnet/gru.hpp"
#include "madtwinnet/masker.hpp"
#include "madtwinnet/tensor.hpp"

namespace madt {

/// Whether the twin-state targets receive gradient from the hidden-state
/// regularizer. `stop` treats H_twin as a constant.
enum class TwinLossBackprop { stop, full };

struct TwinOptions {
  TwinLossBackprop backprop = TwinLossBackprop::stop;
  // When set, the twin reuses the Masker's mask projection instead of its own.
  bool shares_projection = false;
};

/// Training-only backward twin of the decoder path plus the affine bridge.
struct TwinParams {
  GruParams decoder;  // 2F -> F
  Matrix w_mask;      // F x N
  Matrix b_mask;      // 1 x N
  Matrix w_bridge;    // F x F
  Matrix b_bridge;    // 1 x F

  static TwinParams zeros(const MaskerConfig& cfg);
};

struct TwinOutput {
  Matrix v_twin;  // T' x N
  Matrix h_twin;  // T' x F, forward time order
};

/// Runs the twin decoder over H_enc in reverse time, re-reverses its states
/// and applies the (own or shared) mask projection and skip filter.
TwinOutput twin_forward(const Matrix& h_enc, const Matrix& v_central, const TwinParams& twin,
                        const MaskerParams& masker, const TwinOptions& opts = {});

/// Sum over frames of || h_dec_t W_bridge + b_bridge - h_twin_t ||_2.
double twin_regularization_loss(const Matrix& h_dec, const Matrix& h_twin,
                                const Matrix& w_bridge, const Matrix& b_bridge);

// ---- batched interface ----

struct TwinTrace {
  GruTrace decoder;
  FrameSeq h_twin;  // forward order
  FrameSeq pre;     // mask pre-activations
};

struct TwinBatchOutput {
  FrameSeq v_twin;
  FrameSeq h_twin;
};

TwinBatchOutput twin_forward_batch(const FrameSeq& h_enc, const FrameSeq& v_central,
                                   const TwinParams& twin, const MaskerParams& masker,
                                   const TwinOptions& opts, TwinTrace* trace = nullptr);

/// Back-propagates through the twin path. Gradients for the mask projection
/// go to `twin_grad` or, when shared, to `masker_grad`. Returns d/d(H_enc).
FrameSeq twin_backward(const TwinParams& twin, const MaskerParams& masker, const TwinOptions& opts,
                       const TwinTrace& trace, const FrameSeq& v_central, const FrameSeq& d_v_twin,
                       const FrameSeq& d_h_twin, TwinParams& twin_grad, MaskerParams& masker_grad);

struct TwinLossGrad {
  double loss = 0.0;  // summed over frames and batch rows, before scaling
  FrameSeq d_h_dec;
  FrameSeq d_h_twin;  // zero under TwinLossBackprop::stop
};

/// Evaluates the regularizer over a batch and, scaled by `scale`, its
/// gradient. Bridge gradients are accumulated into `twin_grad`.
TwinLossGrad twin_regularization_batch(const FrameSeq& h_dec, const FrameSeq& h_twin,
                                       const TwinParams& twin, TwinLossBackprop backprop,
                                       double scale, TwinParams* twin_grad);

}  // namespace madt
