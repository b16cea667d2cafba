#include "madtwinnet/twinnet.hpp"

#include <cmath>
#include <stdexcept>

namespace madt {

TwinParams TwinParams::zeros(const MaskerConfig& cfg) {
  const auto f = static_cast<Eigen::Index>(cfg.trimmed);
  const auto n = static_cast<Eigen::Index>(cfg.bins);
  return TwinParams{GruParams::zeros(2 * cfg.trimmed, cfg.trimmed), Matrix::Zero(f, n),
                    Matrix::Zero(1, n), Matrix::Zero(f, f), Matrix::Zero(1, f)};
}

TwinBatchOutput twin_forward_batch(const FrameSeq& h_enc, const FrameSeq& v_central,
                                   const TwinParams& twin, const MaskerParams& masker,
                                   const TwinOptions& opts, TwinTrace* trace) {
  if (h_enc.size() != v_central.size()) throw std::invalid_argument("twin_forward: length mismatch");
  const Matrix& w = opts.shares_projection ? masker.w_mask : twin.w_mask;
  const Matrix& b = opts.shares_projection ? masker.b_mask : twin.b_mask;

  TwinBatchOutput out;
  out.h_twin = reversed(gru_forward(twin.decoder, reversed(h_enc), trace ? &trace->decoder : nullptr));
  FrameSeq pre;
  FrameSeq mask = sparsify_batch(out.h_twin, w, b, &pre);
  out.v_twin.reserve(mask.size());
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t].rows() != v_central[t].rows() || mask[t].cols() != v_central[t].cols()) {
      throw std::invalid_argument("twin_forward: skip-filter shape mismatch");
    }
    out.v_twin.push_back(mask[t].cwiseProduct(v_central[t]));
  }
  if (trace != nullptr) {
    trace->h_twin = out.h_twin;
    trace->pre = std::move(pre);
  }
  return out;
}

FrameSeq twin_backward(const TwinParams& twin, const MaskerParams& masker, const TwinOptions& opts,
                       const TwinTrace& trace, const FrameSeq& v_central, const FrameSeq& d_v_twin,
                       const FrameSeq& d_h_twin, TwinParams& twin_grad, MaskerParams& masker_grad) {
  const std::size_t steps = trace.h_twin.size();
  FrameSeq d_mask;
  d_mask.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) d_mask.push_back(d_v_twin[t].cwiseProduct(v_central[t]));
  const Matrix& w = opts.shares_projection ? masker.w_mask : twin.w_mask;
  Matrix& gw = opts.shares_projection ? masker_grad.w_mask : twin_grad.w_mask;
  Matrix& gb = opts.shares_projection ? masker_grad.b_mask : twin_grad.b_mask;
  FrameSeq d_h = sparsify_backward(trace.h_twin, trace.pre, d_mask, w, gw, gb);
  for (std::size_t t = 0; t < steps; ++t) d_h[t] += d_h_twin[t];
  // The decoder ran on the reversed sequence.
  return reversed(gru_backward(twin.decoder, trace.decoder, reversed(d_h), twin_grad.decoder));
}

TwinLossGrad twin_regularization_batch(const FrameSeq& h_dec, const FrameSeq& h_twin,
                                       const TwinParams& twin, TwinLossBackprop backprop,
                                       double scale, TwinParams* twin_grad) {
  if (h_dec.size() != h_twin.size()) {
    throw std::invalid_argument("twin_regularization_loss: length mismatch");
  }
  TwinLossGrad out;
  out.d_h_dec.reserve(h_dec.size());
  out.d_h_twin.reserve(h_dec.size());
  for (std::size_t t = 0; t < h_dec.size(); ++t) {
    if (h_dec[t].rows() != h_twin[t].rows() || h_dec[t].cols() != h_twin[t].cols() ||
        h_dec[t].cols() != twin.w_bridge.rows()) {
      throw std::invalid_argument("twin_regularization_loss: shape mismatch");
    }
    Matrix diff = h_dec[t] * twin.w_bridge;
    diff.rowwise() += twin.b_bridge.row(0);
    diff -= h_twin[t];
    const Eigen::VectorXd norms = diff.rowwise().norm();
    out.loss += norms.sum();

    // d||d||/dd = d / ||d||; zero subgradient at the origin.
    Matrix d_diff = diff;
    for (Eigen::Index i = 0; i < diff.rows(); ++i) {
      d_diff.row(i) = norms(i) > 0.0 ? Matrix(diff.row(i) * (scale / norms(i)))
                                     : Matrix::Zero(1, diff.cols());
    }
    if (twin_grad != nullptr) {
      twin_grad->w_bridge.noalias() += h_dec[t].transpose() * d_diff;
      twin_grad->b_bridge += d_diff.colwise().sum();
    }
    out.d_h_dec.push_back(d_diff * twin.w_bridge.transpose());
    if (backprop == TwinLossBackprop::full) {
      out.d_h_twin.push_back(-d_diff);
    } else {
      out.d_h_twin.push_back(Matrix::Zero(diff.rows(), diff.cols()));
    }
  }
  return out;
}

TwinOutput twin_forward(const Matrix& h_enc, const Matrix& v_central, const TwinParams& twin,
                        const MaskerParams& masker, const TwinOptions& opts) {
  const auto out = twin_forward_batch(to_time_major({h_enc}), to_time_major({v_central}), twin,
                                      masker, opts);
  return TwinOutput{to_batch_major(out.v_twin).front(), to_batch_major(out.h_twin).front()};
}

double twin_regularization_loss(const Matrix& h_dec, const Matrix& h_twin,
                                const Matrix& w_bridge, const Matrix& b_bridge) {
  if (h_dec.rows() != h_twin.rows() || h_dec.cols() != h_twin.cols() ||
      w_bridge.rows() != h_dec.cols() || w_bridge.cols() != h_twin.cols() ||
      b_bridge.cols() != w_bridge.cols()) {
    throw std::invalid_argument("twin_regularization_loss: shape mismatch");
  }
  Matrix diff = h_dec * w_bridge;
  diff.rowwise() += b_bridge.row(0);
  diff -= h_twin;
  return diff.rowwise().norm().sum();
}

}  // namespace madt
