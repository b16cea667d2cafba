#include "madtwinnet/wav.hpp"

#include "madtwinnet/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace madt {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

MonoAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError(path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) throw WavError(path.string() + ": short fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      sample_rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40 || available < 40) throw WavError(path.string() + ": short extensible fmt");
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Tolerate writers that leave a bogus size on streamed files.
      data_size = std::min<std::size_t>(size, available);
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0 || sample_rate == 0) throw WavError(path.string() + ": missing fmt chunk");
  if (data == nullptr) throw WavError(path.string() + ": missing data chunk");

  std::size_t bytes_per_sample = 0;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw WavError(path.string() + ": unsupported sample format (need PCM16 or float32)");
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  MonoAudio audio;
  audio.sample_rate = sample_rate;
  audio.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * bytes_per_sample;
      if (bytes_per_sample == 2) {
        acc += static_cast<double>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(read_u32(p)));
      }
    }
    audio.samples[f] = acc / static_cast<double>(channels);
  }
  return audio;
}

void write_wav_interleaved(const std::filesystem::path& path, std::span<const double> interleaved,
                           std::size_t channels, std::size_t sample_rate, WavFormat format) {
  if (channels == 0) throw WavError("write_wav: zero channels");
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint16_t bytes_per_sample = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(interleaved.size() * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * channels * bytes_per_sample));
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);
  for (double v : interleaved) {
    if (format == WavFormat::pcm16) {
      // Same 1/32768 scale as the reader; +1.0 saturates at 32767.
      const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      const auto q = static_cast<std::int16_t>(scaled);
      put_u16(out, static_cast<std::uint16_t>(q));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError("short write to " + path.string());
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               std::size_t sample_rate, WavFormat format) {
  write_wav_interleaved(path, samples, 1, sample_rate, format);
}

}  // namespace madt
