#pragma once

#include "madtwinnet/signal.hpp"
#include "madtwinnet/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace madt {

/// Denominator floor shared by the oracle masks.
inline constexpr double kMaskEpsilon = 1e-6;

/// Subsequence geometry: T frames per window, L context frames on each side.
struct SequenceConfig {
  std::size_t length = 60;   // T
  std::size_t context = 10;  // L

  std::size_t central() const { return length - 2 * context; }  // T'
  void validate() const;
};

/// Overlapping T x N windows cut from one magnitude spectrogram.
struct SubsequenceBatch {
  std::vector<Matrix> windows;
  std::size_t source_frames = 0;
  SequenceConfig config;
};

struct TrackPair {
  std::vector<double> mixture;
  std::vector<double> voice;
  std::vector<double> accompaniment;
  std::size_t sample_rate = 44100;
};

/// IRM of source j: V^j / sum_j' V^j', denominator floored at kMaskEpsilon.
Matrix ideal_ratio_mask(std::span<const MagnitudeSpectrogram> sources, std::size_t j);

/// IAM: source / mixture with the same floor. Unbounded above.
Matrix ideal_amplitude_mask(const MagnitudeSpectrogram& source,
                            const MagnitudeSpectrogram& mixture);

/// Training target 2 * IRM(voice) * (sum of source magnitudes).
MagnitudeSpectrogram make_training_target(const MagnitudeSpectrogram& voice,
                                          std::span<const MagnitudeSpectrogram> all_sources);

/// Window b covers frames [b*T' - L, b*T' - L + T); frames outside [0, M) are zero.
SubsequenceBatch make_subsequences(const MagnitudeSpectrogram& mag, const SequenceConfig& cfg);

/// Rows L .. T-L-1 of a T x N window.
Matrix central_frames(const Matrix& window, const SequenceConfig& cfg);

/// Concatenates B central T' x N blocks and truncates to `source_frames` rows.
MagnitudeSpectrogram overlap_reconstruct(std::span<const Matrix> outputs,
                                         std::size_t source_frames);

/// Deterministic synthetic stems: a vibrato harmonic melody as "voice",
/// low chords plus low-passed noise as "accompaniment". The mixture is their
/// exact sum, with all three scaled so the mixture peak is 0.8.
TrackPair synth_fixture(std::uint64_t seed, double duration_s, std::size_t sample_rate = 44100);

/// Writes `<dir>/mixture.wav`, `vocals.wav`, `accompaniment.wav` (float32).
void write_track_dir(const std::filesystem::path& dir, const TrackPair& track);

/// Reads the three stems of one track directory.
TrackPair read_track_dir(const std::filesystem::path& dir);

/// Sorted names of the track subdirectories of a dataset root.
std::vector<std::string> list_tracks(const std::filesystem::path& root);

}  // namespace madt
