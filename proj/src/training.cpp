#include "madtwinnet/training.hpp"

#include "madtwinnet/errors.hpp"
#include "madtwinnet/gradcheck.hpp"
#include "madtwinnet/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace madt {
namespace {

double min_abs(const Matrix& m) { return m.size() == 0 ? std::numeric_limits<double>::infinity() : m.cwiseAbs().minCoeff(); }

double min_abs(const FrameSeq& s) {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& m : s) v = std::min(v, min_abs(m));
  return v;
}

double min_positive(const Matrix& m) {
  double v = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m.data()[i] > 0.0) v = std::min(v, m.data()[i]);
  }
  return v;
}

}  // namespace

LossBreakdown composite_loss(const ParameterSet& params, const TrainingBatch& batch,
                             const MaskerConfig& dims, const LossOptions& opts,
                             ParameterSet* grad, LossExtras* extras) {
  dims.validate();
  if (batch.inputs.empty() || batch.inputs.size() != batch.targets.size()) {
    throw std::invalid_argument("composite_loss: batch needs matching non-empty inputs/targets");
  }
  const auto& seq = dims.sequence;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<std::size_t>(batch.inputs[b].rows()) != seq.length ||
        static_cast<std::size_t>(batch.inputs[b].cols()) != dims.bins ||
        static_cast<std::size_t>(batch.targets[b].rows()) != seq.central() ||
        static_cast<std::size_t>(batch.targets[b].cols()) != dims.bins) {
      throw std::invalid_argument("composite_loss: window shape mismatch");
    }
  }
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const std::size_t central = seq.central();
  if (grad != nullptr) *grad = ParameterSet::zeros(dims);

  // ---- forward ----
  const FrameSeq v_in = to_time_major(batch.inputs);
  const FrameSeq v_central(v_in.begin() + static_cast<std::ptrdiff_t>(seq.context),
                           v_in.begin() + static_cast<std::ptrdiff_t>(seq.context + central));
  const Matrix target = stack_rows(to_time_major(batch.targets));

  EncoderTrace enc_trace;
  const FrameSeq h_enc = encode_batch(trim_batch(v_in, dims.trimmed), params.masker, dims, &enc_trace);
  GruTrace dec_trace;
  const FrameSeq h_dec = gru_forward(params.masker.decoder, h_enc, &dec_trace);
  FrameSeq mask_pre;
  const FrameSeq mask = sparsify_batch(h_dec, params.masker.w_mask, params.masker.b_mask, &mask_pre);
  FrameSeq v_masked(central);
  for (std::size_t t = 0; t < central; ++t) v_masked[t] = mask[t].cwiseProduct(v_central[t]);
  const Matrix masked_stacked = stack_rows(v_masked);

  DenoiserTrace den_trace;
  const Matrix denoised = denoise(masked_stacked, params.denoiser, &den_trace);

  LossBreakdown loss;
  loss.masker = generalized_kl(target, masked_stacked) * inv_batch;
  loss.denoiser = generalized_kl(target, denoised) * inv_batch;

  TwinTrace twin_trace;
  TwinBatchOutput twin_out;
  Matrix twin_stacked;
  TwinLossGrad reg;
  if (opts.twin_enabled) {
    twin_out = twin_forward_batch(h_enc, v_central, params.twin, params.masker, opts.twin, &twin_trace);
    twin_stacked = stack_rows(twin_out.v_twin);
    loss.twin_kl = generalized_kl(target, twin_stacked) * inv_batch;
    const FrameSeq& states = opts.frozen_twin_states ? *opts.frozen_twin_states : twin_out.h_twin;
    reg = twin_regularization_batch(h_dec, states, params.twin, opts.twin.backprop,
                                    opts.twin_weight * inv_batch, grad ? &grad->twin : nullptr);
    loss.twin_reg = reg.loss * inv_batch;
  }

  const auto& w_mask = params.masker.w_mask;
  const Eigen::Index diag = std::min(w_mask.rows(), w_mask.cols());
  for (Eigen::Index i = 0; i < diag; ++i) loss.diag_l1 += std::abs(w_mask(i, i));
  loss.dec_l2 = params.denoiser.w_dec.squaredNorm();
  loss.total = loss.denoiser + loss.masker + loss.twin_kl + opts.twin_weight * loss.twin_reg +
               opts.lambda_diag * loss.diag_l1 + opts.lambda_dec * loss.dec_l2;

  if (extras != nullptr) {
    extras->twin_states = twin_out.h_twin;
    double margin = std::min({min_abs(mask_pre), min_abs(den_trace.pre_enc), min_abs(den_trace.pre_dec)});
    if (opts.twin_enabled) margin = std::min(margin, min_abs(twin_trace.pre));
    extras->relu_margin = margin;
    double smallest = std::min(min_positive(masked_stacked), min_positive(denoised));
    if (opts.twin_enabled) smallest = std::min(smallest, min_positive(twin_stacked));
    extras->smallest_estimate = smallest;
  }
  if (grad == nullptr) return loss;

  // ---- backward ----
  // Bridge gradients were accumulated while evaluating L_twin above.
  ParameterSet& g = *grad;

  const Matrix d_denoised = generalized_kl_grad(target, denoised) * inv_batch;
  Matrix d_masked = denoise_backward(params.denoiser, den_trace, d_denoised, g.denoiser);
  d_masked += generalized_kl_grad(target, masked_stacked) * inv_batch;
  const FrameSeq d_v_masked = unstack_rows(d_masked, central);
  FrameSeq d_mask(central);
  for (std::size_t t = 0; t < central; ++t) d_mask[t] = d_v_masked[t].cwiseProduct(v_central[t]);
  FrameSeq d_h_dec =
      sparsify_backward(h_dec, mask_pre, d_mask, w_mask, g.masker.w_mask, g.masker.b_mask);

  FrameSeq d_h_enc_twin;
  if (opts.twin_enabled) {
    for (std::size_t t = 0; t < central; ++t) d_h_dec[t] += reg.d_h_dec[t];
    const FrameSeq d_v_twin =
        unstack_rows(generalized_kl_grad(target, twin_stacked) * inv_batch, central);
    d_h_enc_twin = twin_backward(params.twin, params.masker, opts.twin, twin_trace, v_central,
                                 d_v_twin, reg.d_h_twin, g.twin, g.masker);
  }

  FrameSeq d_h_enc = gru_backward(params.masker.decoder, dec_trace, d_h_dec, g.masker.decoder);
  if (opts.twin_enabled) {
    for (std::size_t t = 0; t < central; ++t) d_h_enc[t] += d_h_enc_twin[t];
  }
  encode_backward(params.masker, dims, enc_trace, d_h_enc, g.masker);

  for (Eigen::Index i = 0; i < diag; ++i) {
    const double w = w_mask(i, i);
    g.masker.w_mask(i, i) += opts.lambda_diag * (w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0));
  }
  g.denoiser.w_dec += 2.0 * opts.lambda_dec * params.denoiser.w_dec;
  return loss;
}

AdamState AdamState::zeros(const MaskerConfig& dims) {
  return AdamState{ParameterSet::zeros(dims), ParameterSet::zeros(dims), 0};
}

double global_norm(const ParameterSet& grad) {
  double sq = 0.0;
  grad.for_each([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

double clip_global_norm(ParameterSet& grad, double max_norm) {
  const double norm = global_norm(grad);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    grad.for_each([&](const std::string&, Matrix& m) { m *= scale; });
  }
  return norm;
}

void adam_update(ParameterSet& params, const ParameterSet& grad, AdamState& state,
                 double learning_rate, const AdamConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  // Walk the four sets in lockstep; for_each visits tensors in a fixed order.
  std::vector<const Matrix*> grads;
  grad.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
  std::vector<Matrix*> firsts;
  state.first_moment.for_each([&](const std::string&, Matrix& m) { firsts.push_back(&m); });
  std::vector<Matrix*> seconds;
  state.second_moment.for_each([&](const std::string&, Matrix& m) { seconds.push_back(&m); });

  std::size_t i = 0;
  params.for_each([&](const std::string&, Matrix& p) {
    const Matrix& g = *grads[i];
    Matrix& m = *firsts[i];
    Matrix& v = *seconds[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= learning_rate * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + cfg.epsilon);
    ++i;
  });
}

StepReport train_step(const TrainingBatch& batch, ParameterSet& params, AdamState& state,
                      const TrainConfig& cfg, const MaskerConfig& dims, const LossOptions& opts) {
  if (!params.all_finite()) throw NumericError("train_step: parameters are not finite");
  ParameterSet grad = ParameterSet::zeros(dims);
  StepReport report;
  report.loss = composite_loss(params, batch, dims, opts, &grad);

  const std::pair<const char*, double> terms[] = {
      {"L_D", report.loss.denoiser}, {"L_M", report.loss.masker},
      {"L_TW", report.loss.twin_kl}, {"L_twin", report.loss.twin_reg},
      {"diag_l1", report.loss.diag_l1}, {"dec_l2", report.loss.dec_l2}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NumericError(std::string("train_step: non-finite loss term ") + name + " = " +
                         std::to_string(value));
    }
  }
  report.grad_norm = clip_global_norm(grad, cfg.grad_clip);
  if (!std::isfinite(report.grad_norm)) throw NumericError("train_step: non-finite gradient norm");
  adam_update(params, grad, state, cfg.learning_rate);
  return report;
}

TrainingBatch make_track_windows(const TrackPair& track, const StftConfig& stft_cfg,
                                 const MaskerConfig& dims) {
  if (stft_cfg.retained_bins() != dims.bins) {
    throw std::invalid_argument("make_track_windows: STFT bins differ from model bins");
  }
  const auto mix = magnitude(stft(track.mixture, stft_cfg));
  const MagnitudeSpectrogram sources[] = {magnitude(stft(track.voice, stft_cfg)),
                                          magnitude(stft(track.accompaniment, stft_cfg))};
  const auto target = make_training_target(sources[0], sources);

  const auto in_windows = make_subsequences(mix, dims.sequence);
  const auto target_windows = make_subsequences(target, dims.sequence);
  TrainingBatch batch;
  batch.inputs = in_windows.windows;
  batch.targets.reserve(target_windows.windows.size());
  for (const Matrix& w : target_windows.windows) {
    batch.targets.push_back(central_frames(w, dims.sequence));
  }
  return batch;
}

TrainingBatch concat_batches(const std::vector<TrainingBatch>& parts) {
  TrainingBatch out;
  for (const auto& p : parts) {
    out.inputs.insert(out.inputs.end(), p.inputs.begin(), p.inputs.end());
    out.targets.insert(out.targets.end(), p.targets.begin(), p.targets.end());
  }
  return out;
}

TrainingBatch select_windows(const TrainingBatch& pool, const std::vector<std::size_t>& indices) {
  TrainingBatch out;
  out.inputs.reserve(indices.size());
  out.targets.reserve(indices.size());
  for (std::size_t i : indices) {
    out.inputs.push_back(pool.inputs.at(i));
    out.targets.push_back(pool.targets.at(i));
  }
  return out;
}

GradCheckReport gradient_check_full(std::uint64_t seed, const MaskerConfig& dims,
                                    const GradCheckOptions& opts) {
  constexpr double kKinkMargin = 1e-3;
  constexpr double kPoleMargin = 0.05;
  constexpr int kMaxAttempts = 64;
  dims.validate();

  ParameterSet params;
  TrainingBatch batch;
  LossExtras extras;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) {
      throw std::runtime_error("gradient_check_full: no kink-free instance found");
    }
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(attempt));
    params = init_parameters(rng(), dims);
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    std::uniform_real_distribution<double> unit(0.2, 1.0);
    std::bernoulli_distribution alive(0.75);
    // Non-zero biases so bias gradients are exercised away from the origin.
    // Output-side ReLUs (masks, denoiser filter) start clearly active so no
    // estimate sits at the KL pole; a zero estimate adds a large constant to
    // the loss that only inflates finite-difference rounding. The denoiser's
    // hidden layer gets +-0.5 per unit so dead units are covered too.
    params.for_each([&](const std::string& name, Matrix& m) {
      if (name.find(".b_") == std::string::npos) return;
      const bool output_relu =
          name == "masker.b_mask" || name == "twin.b_mask" || name == "denoiser.b_dec";
      const bool hidden_relu = name == "denoiser.b_enc";
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (output_relu) {
          m.data()[i] = 1.5;
        } else if (hidden_relu) {
          m.data()[i] = alive(rng) ? 0.5 : -0.5;
        } else {
          m.data()[i] = bias(rng);
        }
      }
    });
    batch = TrainingBatch{};
    for (std::size_t b = 0; b < opts.batch; ++b) {
      Matrix in(static_cast<Eigen::Index>(dims.sequence.length), static_cast<Eigen::Index>(dims.bins));
      Matrix tg(static_cast<Eigen::Index>(dims.sequence.central()), static_cast<Eigen::Index>(dims.bins));
      for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = unit(rng);
      for (Eigen::Index i = 0; i < tg.size(); ++i) tg.data()[i] = unit(rng);
      batch.inputs.push_back(std::move(in));
      batch.targets.push_back(std::move(tg));
    }
    composite_loss(params, batch, dims, opts.loss, nullptr, &extras);
    if (extras.relu_margin > kKinkMargin && extras.smallest_estimate > kPoleMargin) break;
  }

  ParameterSet analytic = ParameterSet::zeros(dims);
  composite_loss(params, batch, dims, opts.loss, &analytic);
  if (opts.corrupt_analytic) opts.corrupt_analytic(analytic);

  // Stop-gradient semantics: the twin states act as constants inside L_twin.
  LossOptions fd_opts = opts.loss;
  if (opts.loss.twin_enabled && opts.loss.twin.backprop == TwinLossBackprop::stop) {
    fd_opts.frozen_twin_states = &extras.twin_states;
  }

  std::vector<const Matrix*> analytic_tensors;
  analytic.for_each([&](const std::string&, const Matrix& m) { analytic_tensors.push_back(&m); });

  GradCheckReport report;
  std::size_t index = 0;
  params.for_each([&](const std::string& name, Matrix& tensor) {
    const Matrix numeric = central_difference(tensor, [&](const Matrix&) {
      return composite_loss(params, batch, dims, fd_opts).total;
    });
    const double err = max_relative_error(*analytic_tensors[index], numeric);
    report.per_tensor.emplace_back(name, err);
    report.parameters_checked += static_cast<std::size_t>(tensor.size());
    if (report.worst_tensor.empty() || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_tensor = name;
    }
    ++index;
  });
  return report;
}

}  // namespace madt
