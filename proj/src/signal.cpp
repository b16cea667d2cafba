#include "madtwinnet/signal.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace madt {
namespace {

// FFTW planning is not thread-safe, execution with the new-array interface
// is. Plans are created once per transform size and shared.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

struct FftwBuffer {
  explicit FftwBuffer(std::size_t fft_length)
      : real(fftw_alloc_real(fft_length)), spectrum(fftw_alloc_complex(fft_length / 2 + 1)) {}
  ~FftwBuffer() {
    fftw_free(real);
    fftw_free(spectrum);
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  double* real;
  fftw_complex* spectrum;
};

const FftPlans& plans_for(std::size_t fft_length) {
  static std::mutex mutex;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(fft_length);
  if (it != cache.end()) return it->second;
  FftwBuffer scratch(fft_length);
  const int n = static_cast<int>(fft_length);
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, scratch.real, scratch.spectrum, FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_1d(n, scratch.spectrum, scratch.real, FFTW_ESTIMATE);
  return cache.emplace(fft_length, plans).first->second;
}

std::size_t context_pad(const StftConfig& cfg) { return cfg.frame_length / 2; }

}  // namespace

void StftConfig::validate() const {
  if (frame_length == 0 || fft_length == 0 || hop == 0 || sample_rate == 0) {
    throw std::invalid_argument("StftConfig: all fields must be positive");
  }
  if (frame_length > fft_length) {
    throw std::invalid_argument("StftConfig: frame_length exceeds fft_length");
  }
  if (frame_length < 2) throw std::invalid_argument("StftConfig: frame_length must be >= 2");
}

std::vector<double> hamming_window(std::size_t length) {
  if (length < 2) throw std::invalid_argument("hamming_window: length must be >= 2");
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  }
  return w;
}

std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
  return (length + cfg.hop - 1) / cfg.hop;
}

ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("stft: empty input");

  const std::size_t frames = frame_count(samples.size(), cfg);
  const std::size_t bins = cfg.retained_bins();
  const std::size_t pad = context_pad(cfg);
  const auto window = hamming_window(cfg.frame_length);
  const FftPlans& plans = plans_for(cfg.fft_length);
  FftwBuffer buf(cfg.fft_length);

  ComplexSpectrogram spec{ComplexMatrix(static_cast<Eigen::Index>(frames),
                                        static_cast<Eigen::Index>(bins)),
                          cfg};
  const auto len = static_cast<std::ptrdiff_t>(samples.size());
  for (std::size_t m = 0; m < frames; ++m) {
    // Frame start in original-sample coordinates (may be negative).
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(m * cfg.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t n = 0; n < cfg.fft_length; ++n) buf.real[n] = 0.0;
    for (std::size_t n = 0; n < cfg.frame_length; ++n) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(n);
      if (idx >= 0 && idx < len) buf.real[n] = samples[static_cast<std::size_t>(idx)] * window[n];
    }
    fftw_execute_dft_r2c(plans.forward, buf.real, buf.spectrum);
    for (std::size_t k = 0; k < bins; ++k) {
      spec.data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
          std::complex<double>(buf.spectrum[k][0], buf.spectrum[k][1]);
    }
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg,
                          std::optional<std::size_t> length) {
  cfg.validate();
  if (spec.bins() != cfg.retained_bins()) {
    throw std::invalid_argument("istft: spectrogram bin count does not match config");
  }
  const std::size_t frames = spec.frames();
  if (frames == 0) throw std::invalid_argument("istft: spectrogram has no frames");
  const std::size_t out_len = length.value_or(frames * cfg.hop);
  if (frame_count(out_len, cfg) != frames) {
    throw std::invalid_argument("istft: requested length inconsistent with frame count");
  }

  const std::size_t pad = context_pad(cfg);
  const auto window = hamming_window(cfg.frame_length);
  const FftPlans& plans = plans_for(cfg.fft_length);
  FftwBuffer buf(cfg.fft_length);

  const std::size_t padded_len = (frames - 1) * cfg.hop + cfg.frame_length;
  std::vector<double> accum(padded_len, 0.0);
  std::vector<double> weight(padded_len, 0.0);
  const double scale = 1.0 / static_cast<double>(cfg.fft_length);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t k = 0; k < spec.bins(); ++k) {
      const auto v = spec.data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      buf.spectrum[k][0] = v.real();
      buf.spectrum[k][1] = v.imag();
    }
    fftw_execute_dft_c2r(plans.inverse, buf.spectrum, buf.real);
    const std::size_t start = m * cfg.hop;
    for (std::size_t n = 0; n < cfg.frame_length; ++n) {
      accum[start + n] += buf.real[n] * scale * window[n];
      weight[start + n] += window[n] * window[n];
    }
  }

  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t p = i + pad;
    if (p < padded_len && weight[p] > 1e-12) out[i] = accum[p] / weight[p];
  }
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  return MagnitudeSpectrogram{spec.data.cwiseAbs()};
}

Matrix phase(const ComplexSpectrogram& spec) {
  return spec.data.unaryExpr([](const std::complex<double>& c) { return std::arg(c); });
}

ComplexSpectrogram polar(const Matrix& mag, const Matrix& phase_angles, const StftConfig& cfg) {
  if (mag.rows() != phase_angles.rows() || mag.cols() != phase_angles.cols()) {
    throw std::invalid_argument("polar: magnitude and phase shapes differ");
  }
  ComplexSpectrogram spec{ComplexMatrix(mag.rows(), mag.cols()), cfg};
  for (Eigen::Index i = 0; i < mag.rows(); ++i) {
    for (Eigen::Index k = 0; k < mag.cols(); ++k) {
      spec.data(i, k) = std::polar(mag(i, k), phase_angles(i, k));
    }
  }
  return spec;
}

namespace {

double full_spectrum_distance(const ComplexMatrix& spec, const Matrix& target,
                              const StftConfig& cfg) {
  const Eigen::Index bins = spec.cols();
  const bool even_fft = cfg.fft_length % 2 == 0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < spec.rows(); ++i) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double d = std::abs(spec(i, k)) - target(i, k);
      const bool edge = k == 0 || (even_fft && k == bins - 1);
      total += (edge ? 1.0 : 2.0) * d * d;
    }
  }
  return std::sqrt(total);
}

}  // namespace

double spectral_inconsistency(std::span<const double> samples, const Matrix& target,
                              const StftConfig& cfg) {
  const auto spec = stft(samples, cfg);
  if (spec.data.rows() != target.rows() || spec.data.cols() != target.cols()) {
    throw std::invalid_argument("spectral_inconsistency: shape mismatch");
  }
  return full_spectrum_distance(spec.data, target, cfg);
}

GriffinLimResult griffin_lim(const MagnitudeSpectrogram& target_mag, const Matrix& init_phase,
                             std::size_t iterations, const StftConfig& cfg,
                             std::optional<std::size_t> length, bool track_inconsistency) {
  cfg.validate();
  if (target_mag.data.rows() != init_phase.rows() || target_mag.data.cols() != init_phase.cols()) {
    throw std::invalid_argument("griffin_lim: magnitude and phase shapes differ");
  }
  if (target_mag.bins() != cfg.retained_bins()) {
    throw std::invalid_argument("griffin_lim: bin count does not match config");
  }
  const std::size_t out_len = length.value_or(target_mag.frames() * cfg.hop);

  GriffinLimResult result;
  result.samples = istft(polar(target_mag.data, init_phase, cfg), cfg, out_len);
  auto measure = [&](const ComplexMatrix& spec) {
    if (track_inconsistency) {
      result.inconsistency.push_back(full_spectrum_distance(spec, target_mag.data, cfg));
    }
  };

  ComplexSpectrogram current = stft(result.samples, cfg);
  measure(current.data);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < current.data.rows(); ++i) {
      for (Eigen::Index k = 0; k < current.data.cols(); ++k) {
        const auto c = current.data(i, k);
        const double a = std::abs(c);
        const auto unit = a > 0.0 ? c / a : std::complex<double>(1.0, 0.0);
        current.data(i, k) = target_mag.data(i, k) * unit;
      }
    }
    result.samples = istft(current, cfg, out_len);
    current = stft(result.samples, cfg);
    measure(current.data);
  }
  return result;
}

}  // namespace madt
