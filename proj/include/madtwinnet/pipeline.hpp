#pragma once

#include "madtwinnet/checkpoint.hpp"
#include "madtwinnet/config.hpp"
#include "madtwinnet/data.hpp"
#include "madtwinnet/training.hpp"

#include <cstddef>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace madt {

/// Masker + Denoiser over every subsequence of a mixture magnitude
/// spectrogram, re-aggregated to M x N. Twin parameters are never read.
MagnitudeSpectrogram separate_magnitude(const Matrix& mixture_mag, const MaskerParams& masker,
                                        const DenoiserParams& denoiser, const MaskerConfig& dims);

/// Full separation: STFT, network, Griffin-Lim seeded with the mixture
/// phase. The output has the same length as the input.
std::vector<double> separate_voice(std::span<const double> mixture, const Checkpoint& ckpt,
                                   std::size_t gla_iterations);

inline constexpr const char* kTrainingLogHeader =
    "step,L_D,L_M,L_TW,L_twin,diag_l1,dec_l2,total,grad_norm";

/// One CSV row of the training log, full double precision.
std::string format_log_row(std::size_t step, const StepReport& report);

/// Owns parameters and optimizer state for a training run over a pooled set
/// of windows, reshuffled every epoch with the run seed.
class TrainingSession {
 public:
  TrainingSession(const RunConfig& cfg, TrainingBatch pool);

  /// Runs one pass over the pool in minibatches of cfg.train.batch_size.
  /// `on_step` sees each report right after its update.
  void run_epoch(const std::function<void(std::size_t step, const StepReport&)>& on_step = {});

  /// Runs exactly `steps` updates, wrapping into new epochs as needed.
  void run_steps(std::size_t steps,
                 const std::function<void(std::size_t step, const StepReport&)>& on_step = {});

  /// Objective over the whole pool with the current parameters.
  LossBreakdown evaluate_pool() const;

  Checkpoint checkpoint() const;

  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  std::size_t steps_taken() const { return step_; }
  const RunConfig& config() const { return cfg_; }

 private:
  void refill_order();
  StepReport step_once(const std::vector<std::size_t>& indices);

  RunConfig cfg_;
  MaskerConfig dims_;
  LossOptions loss_opts_;
  TrainingBatch pool_;
  ParameterSet params_;
  AdamState adam_;
  std::mt19937_64 shuffle_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
};

}  // namespace madt
