#include "madtwinnet/masker.hpp"

#include "madtwinnet/errors.hpp"

#include <stdexcept>

namespace madt {
namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

void require_finite(const FrameSeq& s, const char* what) {
  if (!all_finite(s)) throw NumericError(std::string(what) + ": non-finite input");
}

std::size_t backward_index(EncoderAlignment alignment, std::size_t t, std::size_t steps) {
  return alignment == EncoderAlignment::realigned ? steps - 1 - t : t;
}

}  // namespace

void MaskerConfig::validate() const {
  sequence.validate();
  if (trimmed == 0 || trimmed > bins) {
    throw std::invalid_argument("MaskerConfig: need 0 < F <= N");
  }
}

MaskerParams MaskerParams::zeros(const MaskerConfig& cfg) {
  const auto f = static_cast<Eigen::Index>(cfg.trimmed);
  const auto n = static_cast<Eigen::Index>(cfg.bins);
  return MaskerParams{GruParams::zeros(cfg.trimmed, cfg.trimmed),
                      GruParams::zeros(cfg.trimmed, cfg.trimmed),
                      GruParams::zeros(2 * cfg.trimmed, cfg.trimmed), Matrix::Zero(f, n),
                      Matrix::Zero(1, n)};
}

Matrix trim(const Matrix& v_in, std::size_t trimmed) {
  if (trimmed > static_cast<std::size_t>(v_in.cols())) {
    throw std::invalid_argument("trim: F exceeds the number of bins");
  }
  return v_in.leftCols(static_cast<Eigen::Index>(trimmed));
}

FrameSeq trim_batch(const FrameSeq& v_in, std::size_t trimmed) {
  FrameSeq out;
  out.reserve(v_in.size());
  for (const auto& m : v_in) out.push_back(trim(m, trimmed));
  return out;
}

FrameSeq encode_batch(const FrameSeq& v_tr, const MaskerParams& params, const MaskerConfig& cfg,
                      EncoderTrace* trace) {
  const std::size_t steps = v_tr.size();
  if (steps != cfg.sequence.length) throw std::invalid_argument("encode: input length differs from T");
  cfg.sequence.validate();
  require_finite(v_tr, "encode");

  const FrameSeq rev = reversed(v_tr);
  const FrameSeq fwd = gru_forward(params.enc_forward, v_tr, trace ? &trace->forward : nullptr);
  const FrameSeq bwd = gru_forward(params.enc_backward, rev, trace ? &trace->backward : nullptr);

  const std::size_t context = cfg.sequence.context;
  const Eigen::Index f = params.enc_forward.hidden_size();
  FrameSeq out;
  out.reserve(steps - 2 * context);
  for (std::size_t t = context; t < steps - context; ++t) {
    const std::size_t k = backward_index(cfg.alignment, t, steps);
    Matrix h(v_tr[t].rows(), 2 * f);
    h.leftCols(f) = fwd[t] + v_tr[t];
    h.rightCols(f) = bwd[k] + rev[k];
    out.push_back(std::move(h));
  }
  return out;
}

void encode_backward(const MaskerParams& params, const MaskerConfig& cfg,
                     const EncoderTrace& trace, const FrameSeq& d_h_enc, MaskerParams& grad) {
  const std::size_t steps = trace.forward.x.size();
  const std::size_t context = cfg.sequence.context;
  if (d_h_enc.size() + 2 * context != steps) {
    throw std::invalid_argument("encode_backward: gradient length mismatch");
  }
  const Eigen::Index f = params.enc_forward.hidden_size();
  const Eigen::Index batch = d_h_enc.empty() ? 0 : d_h_enc.front().rows();
  FrameSeq d_fwd(steps, Matrix::Zero(batch, f));
  FrameSeq d_bwd(steps, Matrix::Zero(batch, f));
  for (std::size_t i = 0; i < d_h_enc.size(); ++i) {
    const std::size_t t = i + context;
    d_fwd[t] = d_h_enc[i].leftCols(f);
    d_bwd[backward_index(cfg.alignment, t, steps)] = d_h_enc[i].rightCols(f);
  }
  gru_backward(params.enc_forward, trace.forward, d_fwd, grad.enc_forward);
  gru_backward(params.enc_backward, trace.backward, d_bwd, grad.enc_backward);
}

FrameSeq sparsify_batch(const FrameSeq& h, const Matrix& w, const Matrix& b, FrameSeq* pre) {
  FrameSeq out;
  out.reserve(h.size());
  if (pre != nullptr) pre->clear();
  for (const Matrix& ht : h) {
    if (ht.cols() != w.rows()) throw std::invalid_argument("sparsify: shape mismatch");
    Matrix a = ht * w;
    a.rowwise() += b.row(0);
    out.push_back(a.cwiseMax(0.0));
    if (pre != nullptr) pre->push_back(std::move(a));
  }
  return out;
}

FrameSeq sparsify_backward(const FrameSeq& h, const FrameSeq& pre, const FrameSeq& d_mask,
                           const Matrix& w, Matrix& grad_w, Matrix& grad_b) {
  FrameSeq d_h;
  d_h.reserve(h.size());
  for (std::size_t t = 0; t < h.size(); ++t) {
    const Matrix d_a = (pre[t].array() > 0.0).select(d_mask[t], 0.0);
    grad_w.noalias() += h[t].transpose() * d_a;
    grad_b += d_a.colwise().sum();
    d_h.push_back(d_a * w.transpose());
  }
  return d_h;
}

Matrix encode(const Matrix& v_tr, const MaskerParams& params, const MaskerConfig& cfg) {
  return to_batch_major(encode_batch(to_time_major({v_tr}), params, cfg)).front();
}

Matrix decode(const Matrix& h_enc, const MaskerParams& params) {
  if (h_enc.cols() != params.decoder.input_size()) {
    throw std::invalid_argument("decode: input width differs from 2F");
  }
  require_finite(h_enc, "decode");
  return to_batch_major(gru_forward(params.decoder, to_time_major({h_enc}))).front();
}

Matrix sparsify(const Matrix& h_dec, const Matrix& w, const Matrix& b) {
  if (h_dec.cols() != w.rows() || b.cols() != w.cols()) {
    throw std::invalid_argument("sparsify: shape mismatch");
  }
  Matrix a = h_dec * w;
  a.rowwise() += b.row(0);
  return a.cwiseMax(0.0);
}

Matrix apply_skip_filter(const Matrix& mask, const Matrix& v_central) {
  if (mask.rows() != v_central.rows() || mask.cols() != v_central.cols()) {
    throw std::invalid_argument("apply_skip_filter: shape mismatch");
  }
  return mask.cwiseProduct(v_central);
}

MaskerOutput masker_forward(const Matrix& v_in, const MaskerParams& params,
                            const MaskerConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(v_in.rows()) != cfg.sequence.length ||
      static_cast<std::size_t>(v_in.cols()) != cfg.bins) {
    throw std::invalid_argument("masker_forward: input must be T x N");
  }
  require_finite(v_in, "masker_forward");
  const Matrix h_enc = encode(trim(v_in, cfg.trimmed), params, cfg);
  Matrix h_dec = decode(h_enc, params);
  const Matrix mask = sparsify(h_dec, params.w_mask, params.b_mask);
  return MaskerOutput{apply_skip_filter(mask, central_frames(v_in, cfg.sequence)),
                      std::move(h_dec)};
}

}  // namespace madt
