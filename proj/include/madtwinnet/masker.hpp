#pragma once

#include "madtwinnet/data.hpp"
#include "madtwinnet/gru.hpp"
#include "madtwinnet/tensor.hpp"

#include <cstddef>

namespace madt {

/// How backward-encoder states are paired with forward states before
/// concatenation.
///  - realigned: position t pairs the forward state after frame t with the
///    backward state after consuming frames T..t (standard Bi-RNN).
///  - literal: position t pairs with the t-th backward state of the reversed
///    stream, plus the t-th reversed input frame.
enum class EncoderAlignment { literal, realigned };

struct MaskerConfig {
  std::size_t bins = 2049;    // N
  std::size_t trimmed = 744;  // F, also every recurrent hidden size
  SequenceConfig sequence;
  EncoderAlignment alignment = EncoderAlignment::realigned;

  void validate() const;
};

struct MaskerParams {
  GruParams enc_forward;   // F -> F
  GruParams enc_backward;  // F -> F
  GruParams decoder;       // 2F -> F
  Matrix w_mask;           // F x N
  Matrix b_mask;           // 1 x N

  static MaskerParams zeros(const MaskerConfig& cfg);
};

// ---- single-window interface (T x N in, T' x N out) ----

/// Keeps bins 0..F-1.
Matrix trim(const Matrix& v_in, std::size_t trimmed);

/// Bi-directional GRU encoder with residual input connections; drops the
/// first and last L positions. Returns T' x 2F.
Matrix encode(const Matrix& v_tr, const MaskerParams& params, const MaskerConfig& cfg);

/// Forward GRU decoder over the encoder output. Returns T' x F, entries in [-1, 1].
Matrix decode(const Matrix& h_enc, const MaskerParams& params);

/// ReLU(H W + b).
Matrix sparsify(const Matrix& h_dec, const Matrix& w, const Matrix& b);

/// Hadamard product of mask and the central input frames.
Matrix apply_skip_filter(const Matrix& mask, const Matrix& v_central);

struct MaskerOutput {
  Matrix filtered;  // T' x N
  Matrix h_dec;     // T' x F
};

MaskerOutput masker_forward(const Matrix& v_in, const MaskerParams& params,
                            const MaskerConfig& cfg);

// ---- batched, time-major interface used by training ----

struct EncoderTrace {
  GruTrace forward;
  GruTrace backward;
};

FrameSeq trim_batch(const FrameSeq& v_in, std::size_t trimmed);

FrameSeq encode_batch(const FrameSeq& v_tr, const MaskerParams& params, const MaskerConfig& cfg,
                      EncoderTrace* trace = nullptr);

/// Accumulates encoder parameter gradients from d(loss)/d(H_enc).
void encode_backward(const MaskerParams& params, const MaskerConfig& cfg,
                     const EncoderTrace& trace, const FrameSeq& d_h_enc, MaskerParams& grad);

/// ReLU projection per frame; `pre` receives the pre-activations.
FrameSeq sparsify_batch(const FrameSeq& h, const Matrix& w, const Matrix& b,
                        FrameSeq* pre = nullptr);

/// Returns d(loss)/d(h) and accumulates into grad_w / grad_b.
FrameSeq sparsify_backward(const FrameSeq& h, const FrameSeq& pre, const FrameSeq& d_mask,
                           const Matrix& w, Matrix& grad_w, Matrix& grad_b);

}  // namespace madt
