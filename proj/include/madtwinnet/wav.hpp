#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace madt {

enum class WavFormat { pcm16, float32 };

struct MonoAudio {
  std::vector<double> samples;
  std::size_t sample_rate = 44100;
};

/// Reads a RIFF/WAVE file with 16-bit PCM or 32-bit IEEE float samples.
/// Multi-channel input is downmixed by averaging the channels.
MonoAudio read_wav(const std::filesystem::path& path);

/// Writes mono samples. PCM16 output is clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               std::size_t sample_rate, WavFormat format = WavFormat::float32);

/// Writes interleaved multi-channel samples (frames * channels values).
void write_wav_interleaved(const std::filesystem::path& path, std::span<const double> interleaved,
                           std::size_t channels, std::size_t sample_rate, WavFormat format);

}  // namespace madt
