#include "madtwinnet/data.hpp"

#include "madtwinnet/errors.hpp"
#include "madtwinnet/wav.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace madt {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

Matrix source_sum(std::span<const MagnitudeSpectrogram> sources, const char* what) {
  if (sources.empty()) throw std::invalid_argument(std::string(what) + ": no sources");
  Matrix sum = sources.front().data;
  for (std::size_t i = 1; i < sources.size(); ++i) {
    require_same_shape(sum, sources[i].data, what);
    sum += sources[i].data;
  }
  return sum;
}

// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double midi_to_hz(double note) { return 440.0 * std::pow(2.0, (note - 69.0) / 12.0); }

}  // namespace

void SequenceConfig::validate() const {
  if (length <= 2 * context) {
    throw std::invalid_argument("SequenceConfig: need T > 2L");
  }
}

Matrix ideal_ratio_mask(std::span<const MagnitudeSpectrogram> sources, std::size_t j) {
  const Matrix sum = source_sum(sources, "ideal_ratio_mask");
  if (j >= sources.size()) throw std::invalid_argument("ideal_ratio_mask: source index out of range");
  return sources[j].data.cwiseQuotient(sum.cwiseMax(kMaskEpsilon));
}

Matrix ideal_amplitude_mask(const MagnitudeSpectrogram& source,
                            const MagnitudeSpectrogram& mixture) {
  require_same_shape(source.data, mixture.data, "ideal_amplitude_mask");
  return source.data.cwiseQuotient(mixture.data.cwiseMax(kMaskEpsilon));
}

MagnitudeSpectrogram make_training_target(const MagnitudeSpectrogram& voice,
                                          std::span<const MagnitudeSpectrogram> all_sources) {
  const Matrix sum = source_sum(all_sources, "make_training_target");
  require_same_shape(voice.data, sum, "make_training_target");
  const Matrix irm = voice.data.cwiseQuotient(sum.cwiseMax(kMaskEpsilon));
  return MagnitudeSpectrogram{2.0 * irm.cwiseProduct(sum)};
}

SubsequenceBatch make_subsequences(const MagnitudeSpectrogram& mag, const SequenceConfig& cfg) {
  cfg.validate();
  const std::size_t frames = mag.frames();
  if (frames == 0) throw std::invalid_argument("make_subsequences: empty spectrogram");
  const std::size_t hop = cfg.central();
  const std::size_t count = (frames + hop - 1) / hop;
  const auto bins = mag.data.cols();

  SubsequenceBatch batch;
  batch.source_frames = frames;
  batch.config = cfg;
  batch.windows.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    Matrix w = Matrix::Zero(static_cast<Eigen::Index>(cfg.length), bins);
    const auto first = static_cast<std::ptrdiff_t>(b * hop) - static_cast<std::ptrdiff_t>(cfg.context);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      const auto src = first + static_cast<std::ptrdiff_t>(t);
      if (src >= 0 && src < static_cast<std::ptrdiff_t>(frames)) {
        w.row(static_cast<Eigen::Index>(t)) = mag.data.row(src);
      }
    }
    batch.windows.push_back(std::move(w));
  }
  return batch;
}

Matrix central_frames(const Matrix& window, const SequenceConfig& cfg) {
  if (static_cast<std::size_t>(window.rows()) != cfg.length) {
    throw std::invalid_argument("central_frames: window length differs from T");
  }
  return window.middleRows(static_cast<Eigen::Index>(cfg.context),
                           static_cast<Eigen::Index>(cfg.central()));
}

MagnitudeSpectrogram overlap_reconstruct(std::span<const Matrix> outputs,
                                         std::size_t source_frames) {
  if (outputs.empty()) throw std::invalid_argument("overlap_reconstruct: no outputs");
  const auto block = outputs.front().rows();
  const auto bins = outputs.front().cols();
  const auto capacity = static_cast<std::size_t>(block) * outputs.size();
  if (source_frames > capacity) {
    throw std::invalid_argument("overlap_reconstruct: more source frames than blocks cover");
  }
  Matrix out(static_cast<Eigen::Index>(source_frames), bins);
  std::size_t row = 0;
  for (const Matrix& o : outputs) {
    if (o.rows() != block || o.cols() != bins) {
      throw std::invalid_argument("overlap_reconstruct: blocks differ in shape");
    }
    for (Eigen::Index t = 0; t < block && row < source_frames; ++t, ++row) {
      out.row(static_cast<Eigen::Index>(row)) = o.row(t);
    }
  }
  return MagnitudeSpectrogram{std::move(out)};
}

TrackPair synth_fixture(std::uint64_t seed, double duration_s, std::size_t sample_rate) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("synth_fixture: duration must be positive");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * static_cast<double>(sample_rate)));
  const double fs = static_cast<double>(sample_rate);
  const double two_pi = 2.0 * std::numbers::pi;

  TrackPair track;
  track.sample_rate = sample_rate;
  std::vector<double> voice(n, 0.0);
  std::vector<double> accomp(n, 0.0);

  // Voice: one note per 0.4 s drawn from a pentatonic set (MIDI 62..81),
  // five harmonics, 5.5 Hz vibrato, short attack/release per note.
  const double note_len = 0.4;
  const int scale[] = {62, 64, 67, 69, 71, 74, 76, 79, 81};
  const std::size_t notes = static_cast<std::size_t>(std::ceil(duration_s / note_len));
  std::vector<double> note_hz(notes);
  for (auto& f : note_hz) f = midi_to_hz(scale[rng() % std::size(scale)]);
  const double vib_rate = 5.5;
  const double vib_depth = 0.012;
  double voice_phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const auto k = std::min(notes - 1, static_cast<std::size_t>(t / note_len));
    const double local = t - static_cast<double>(k) * note_len;
    const double env = std::min({1.0, local / 0.03, (note_len - local) / 0.03});
    const double f0 = note_hz[k] * (1.0 + vib_depth * std::sin(two_pi * vib_rate * t));
    voice_phase += two_pi * f0 / fs;
    double s = 0.0;
    for (int h = 1; h <= 5; ++h) s += std::sin(h * voice_phase) / h;
    voice[i] = 0.3 * std::max(env, 0.0) * s;
  }

  // Accompaniment: one triad per second in the MIDI 40..55 range, plus
  // one-pole low-passed white noise.
  const double chord_len = 1.0;
  const int roots[] = {40, 43, 45, 48};
  const std::size_t chords = static_cast<std::size_t>(std::ceil(duration_s / chord_len));
  std::vector<int> chord_root(chords);
  for (auto& r : chord_root) r = roots[rng() % std::size(roots)];
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const auto k = std::min(chords - 1, static_cast<std::size_t>(t / chord_len));
    const int root = chord_root[k];
    double s = 0.0;
    for (int interval : {0, 4, 7}) {
      const double f = midi_to_hz(root + interval);
      s += std::sin(two_pi * f * t) + 0.4 * std::sin(two_pi * 2.0 * f * t);
    }
    const double white = 2.0 * unit_uniform(rng) - 1.0;
    lp += 0.05 * (white - lp);
    accomp[i] = 0.12 * s + 0.5 * lp;
  }

  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(voice[i] + accomp[i]));
  const double gain = peak > 0.0 ? 0.8 / peak : 1.0;
  track.voice.resize(n);
  track.accompaniment.resize(n);
  track.mixture.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    track.voice[i] = gain * voice[i];
    track.accompaniment[i] = gain * accomp[i];
    track.mixture[i] = track.voice[i] + track.accompaniment[i];
  }
  return track;
}

void write_track_dir(const std::filesystem::path& dir, const TrackPair& track) {
  std::filesystem::create_directories(dir);
  write_wav(dir / "mixture.wav", track.mixture, track.sample_rate);
  write_wav(dir / "vocals.wav", track.voice, track.sample_rate);
  write_wav(dir / "accompaniment.wav", track.accompaniment, track.sample_rate);
}

TrackPair read_track_dir(const std::filesystem::path& dir) {
  for (const char* stem : {"mixture.wav", "vocals.wav", "accompaniment.wav"}) {
    if (!std::filesystem::is_regular_file(dir / stem)) {
      throw DatasetLayoutError(dir.string() + ": missing " + stem);
    }
  }
  auto mix = read_wav(dir / "mixture.wav");
  auto voc = read_wav(dir / "vocals.wav");
  auto acc = read_wav(dir / "accompaniment.wav");
  if (mix.samples.size() != voc.samples.size() || mix.samples.size() != acc.samples.size()) {
    throw DatasetLayoutError(dir.string() + ": stems differ in length");
  }
  if (mix.sample_rate != voc.sample_rate || mix.sample_rate != acc.sample_rate) {
    throw DatasetLayoutError(dir.string() + ": stems differ in sample rate");
  }
  TrackPair track;
  track.sample_rate = mix.sample_rate;
  track.mixture = std::move(mix.samples);
  track.voice = std::move(voc.samples);
  track.accompaniment = std::move(acc.samples);
  return track;
}

std::vector<std::string> list_tracks(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw DatasetLayoutError(root.string() + ": not a directory");
  }
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DatasetLayoutError(root.string() + ": no track directories");
  return names;
}

}  // namespace madt
