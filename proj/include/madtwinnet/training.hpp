#pragma once

#include "madtwinnet/data.hpp"
#include "madtwinnet/parameters.hpp"
#include "madtwinnet/signal.hpp"
#include "madtwinnet/twinnet.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace madt {

/// Individual objective terms. `total` is the weighted sum actually minimized.
struct LossBreakdown {
  double masker = 0.0;     // L_M
  double denoiser = 0.0;   // L_D
  double twin_kl = 0.0;    // L_TW
  double twin_reg = 0.0;   // L_twin
  double diag_l1 = 0.0;    // |diag W_mask|_1
  double dec_l2 = 0.0;     // ||W_dec||_F^2 of the denoiser
  double total = 0.0;
};

struct LossOptions {
  bool twin_enabled = true;
  double twin_weight = 0.5;
  double lambda_diag = 1e-2;
  double lambda_dec = 1e-4;
  TwinOptions twin;
  // When set, L_twin is computed against these states instead of the live
  // twin output. Used to difference the stop-gradient objective.
  const FrameSeq* frozen_twin_states = nullptr;
};

/// Inputs are T x N mixture windows; targets are the matching T' x N central
/// frames of the training target.
struct TrainingBatch {
  std::vector<Matrix> inputs;
  std::vector<Matrix> targets;

  std::size_t size() const { return inputs.size(); }
};

/// Optional by-products of a loss evaluation.
struct LossExtras {
  FrameSeq twin_states;
  // Smallest |pre-activation| over every ReLU in the forward pass.
  double relu_margin = 0.0;
  // Smallest non-zero entry of any estimate fed to a KL term.
  double smallest_estimate = 0.0;
};

/// Evaluates the composite objective. KL and twin terms are averaged over
/// batch items; the two penalties are not. When `grad` is given it is
/// overwritten with the gradient, honoring the twin routing options.
LossBreakdown composite_loss(const ParameterSet& params, const TrainingBatch& batch,
                             const MaskerConfig& dims, const LossOptions& opts,
                             ParameterSet* grad = nullptr, LossExtras* extras = nullptr);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  double grad_clip = 0.5;
  double lambda_diag = 1e-2;
  double lambda_dec = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;

  static AdamState zeros(const MaskerConfig& dims);
};

double global_norm(const ParameterSet& grad);

/// Rescales `grad` so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(ParameterSet& grad, double max_norm);

void adam_update(ParameterSet& params, const ParameterSet& grad, AdamState& state,
                 double learning_rate, const AdamConfig& cfg = {});

struct StepReport {
  LossBreakdown loss;
  double grad_norm = 0.0;  // before clipping
};

/// One optimizer step: loss and gradient, global-norm clipping, Adam update.
/// Throws NumericError naming the offending term if the loss is not finite.
StepReport train_step(const TrainingBatch& batch, ParameterSet& params, AdamState& state,
                      const TrainConfig& cfg, const MaskerConfig& dims, const LossOptions& opts);

/// Every subsequence window of one track, inputs from the mixture and
/// targets from the scaled-IRM voice target.
TrainingBatch make_track_windows(const TrackPair& track, const StftConfig& stft_cfg,
                                 const MaskerConfig& dims);

/// Concatenates the windows of several tracks.
TrainingBatch concat_batches(const std::vector<TrainingBatch>& parts);

TrainingBatch select_windows(const TrainingBatch& pool, const std::vector<std::size_t>& indices);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::vector<std::pair<std::string, double>> per_tensor;
  std::size_t parameters_checked = 0;
};

struct GradCheckOptions {
  LossOptions loss;
  std::size_t batch = 2;
  // Test hook: lets a caller tamper with the analytic gradient before comparison.
  std::function<void(ParameterSet&)> corrupt_analytic;
};

/// Central finite differences of composite_loss against the analytic
/// gradient for every parameter of a seeded random instance. Instances whose
/// ReLU pre-activations come within 1e-3 of a kink are redrawn.
GradCheckReport gradient_check_full(std::uint64_t seed, const MaskerConfig& dims,
                                    const GradCheckOptions& opts = {});

}  // namespace madt
