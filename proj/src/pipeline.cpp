#include "madtwinnet/pipeline.hpp"

#include "madtwinnet/denoiser.hpp"
#include "madtwinnet/masker.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace madt {
namespace {

constexpr std::size_t kInferenceChunk = 64;

}  // namespace

MagnitudeSpectrogram separate_magnitude(const Matrix& mixture_mag, const MaskerParams& masker,
                                        const DenoiserParams& denoiser, const MaskerConfig& dims) {
  dims.validate();
  if (static_cast<std::size_t>(mixture_mag.cols()) != dims.bins) {
    throw std::invalid_argument("separate_magnitude: bin count differs from the model");
  }
  const auto batch = make_subsequences(MagnitudeSpectrogram{mixture_mag}, dims.sequence);
  const std::size_t central = dims.sequence.central();
  const std::size_t context = dims.sequence.context;

  std::vector<Matrix> outputs;
  outputs.reserve(batch.windows.size());
  for (std::size_t start = 0; start < batch.windows.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(batch.windows.size(), start + kInferenceChunk);
    const std::vector<Matrix> chunk(batch.windows.begin() + static_cast<std::ptrdiff_t>(start),
                                    batch.windows.begin() + static_cast<std::ptrdiff_t>(end));
    const FrameSeq v_in = to_time_major(chunk);
    const FrameSeq h_enc = encode_batch(trim_batch(v_in, dims.trimmed), masker, dims);
    const FrameSeq h_dec = gru_forward(masker.decoder, h_enc);
    const FrameSeq mask = sparsify_batch(h_dec, masker.w_mask, masker.b_mask);
    FrameSeq filtered(central);
    for (std::size_t t = 0; t < central; ++t) {
      filtered[t] = mask[t].cwiseProduct(v_in[context + t]);
    }
    const Matrix denoised = denoise(stack_rows(filtered), denoiser);
    for (auto& w : to_batch_major(unstack_rows(denoised, central))) outputs.push_back(std::move(w));
  }
  return overlap_reconstruct(outputs, batch.source_frames);
}

std::vector<double> separate_voice(std::span<const double> mixture, const Checkpoint& ckpt,
                                   std::size_t gla_iterations) {
  const auto spec = stft(mixture, ckpt.stft);
  const auto mag = magnitude(spec);
  const auto voice_mag =
      separate_magnitude(mag.data, ckpt.params.masker, ckpt.params.denoiser, ckpt.dims);
  return griffin_lim(voice_mag, phase(spec), gla_iterations, ckpt.stft, mixture.size()).samples;
}

std::string format_log_row(std::size_t step, const StepReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << step << ',' << r.loss.denoiser << ',' << r.loss.masker << ',' << r.loss.twin_kl << ','
     << r.loss.twin_reg << ',' << r.loss.diag_l1 << ',' << r.loss.dec_l2 << ',' << r.loss.total
     << ',' << r.grad_norm;
  return os.str();
}

TrainingSession::TrainingSession(const RunConfig& cfg, TrainingBatch pool)
    : cfg_(cfg),
      dims_(cfg.masker_config()),
      loss_opts_(cfg.loss_options()),
      pool_(std::move(pool)),
      params_(init_parameters(cfg.train.seed, dims_)),
      adam_(AdamState::zeros(dims_)),
      shuffle_rng_(cfg.train.seed ^ 0x5DEECE66DULL) {
  cfg_.validate();
  if (pool_.size() == 0) throw std::invalid_argument("TrainingSession: empty window pool");
}

void TrainingSession::refill_order() {
  order_.resize(pool_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), shuffle_rng_);
  cursor_ = 0;
}

StepReport TrainingSession::step_once(const std::vector<std::size_t>& indices) {
  return train_step(select_windows(pool_, indices), params_, adam_, cfg_.train, dims_, loss_opts_);
}

void TrainingSession::run_epoch(const std::function<void(std::size_t, const StepReport&)>& on_step) {
  refill_order();
  while (cursor_ < order_.size()) {
    const std::size_t end = std::min(order_.size(), cursor_ + cfg_.train.batch_size);
    const std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                       order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    const StepReport report = step_once(idx);
    ++step_;
    if (on_step) on_step(step_, report);
  }
}

void TrainingSession::run_steps(std::size_t steps,
                                const std::function<void(std::size_t, const StepReport&)>& on_step) {
  for (std::size_t s = 0; s < steps; ++s) {
    if (cursor_ >= order_.size()) refill_order();
    const std::size_t end = std::min(order_.size(), cursor_ + cfg_.train.batch_size);
    const std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                       order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    const StepReport report = step_once(idx);
    ++step_;
    if (on_step) on_step(step_, report);
  }
}

LossBreakdown TrainingSession::evaluate_pool() const {
  return composite_loss(params_, pool_, dims_, loss_opts_);
}

Checkpoint TrainingSession::checkpoint() const {
  return Checkpoint{params_, dims_, cfg_.stft, adam_};
}

}  // namespace madt
