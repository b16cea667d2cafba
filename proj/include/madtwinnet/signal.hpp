#pragma once

#include "madtwinnet/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace madt {

/// Framing parameters of the short-time Fourier transform.
///
/// Frames are centered: the signal is padded with frame_length/2 zeros on
/// both ends and frame m starts at m*hop in the padded signal, so it is
/// centered on original sample m*hop. A signal of `len` samples yields
/// ceil(len/hop) frames.
struct StftConfig {
  std::size_t frame_length = 2049;
  std::size_t fft_length = 4096;
  std::size_t hop = 384;
  std::size_t sample_rate = 44100;

  std::size_t retained_bins() const { return fft_length / 2 + 1; }

  /// Throws std::invalid_argument when the fields are inconsistent.
  void validate() const;
};

/// M x N complex STFT together with the configuration that produced it.
struct ComplexSpectrogram {
  ComplexMatrix data;
  StftConfig config;

  std::size_t frames() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(data.cols()); }
};

/// Non-negative M x N magnitudes.
struct MagnitudeSpectrogram {
  Matrix data;

  std::size_t frames() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(data.cols()); }
};

/// Symmetric Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / (length - 1)).
std::vector<double> hamming_window(std::size_t length);

/// Number of frames produced for a signal of `length` samples.
std::size_t frame_count(std::size_t length, const StftConfig& cfg);

ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg);

/// Weighted overlap-add inverse with the same Hamming window used for
/// synthesis and normalization by the summed squared window. Returns
/// frames*hop samples, or `length` samples when given.
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg,
                          std::optional<std::size_t> length = std::nullopt);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

/// Per-bin phase angle in radians.
Matrix phase(const ComplexSpectrogram& spec);

/// Combines magnitudes and phases into a complex spectrogram.
ComplexSpectrogram polar(const Matrix& mag, const Matrix& phase, const StftConfig& cfg);

/// Distance between |STFT(x)| and `target`, measured over the full
/// (Hermitian-extended) spectrum so that every non-DC, non-Nyquist bin
/// counts twice. This is the quantity Griffin-Lim never increases.
double spectral_inconsistency(std::span<const double> samples, const Matrix& target,
                              const StftConfig& cfg);

struct GriffinLimResult {
  std::vector<double> samples;
  // inconsistency[k] is measured after k iterations (k = 0 is the
  // plain phase-borrowing reconstruction).
  std::vector<double> inconsistency;
};

/// Griffin-Lim phase reconstruction seeded with `init_phase`.
/// iterations = 0 returns istft(target * exp(i * init_phase)).
GriffinLimResult griffin_lim(const MagnitudeSpectrogram& target_mag, const Matrix& init_phase,
                             std::size_t iterations, const StftConfig& cfg,
                             std::optional<std::size_t> length = std::nullopt,
                             bool track_inconsistency = false);

}  // namespace madt
