#include "madtwinnet/checkpoint.hpp"

#include "madtwinnet/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace madt {
namespace {

constexpr char kMagic[4] = {'M', 'A', 'D', 'T'};
constexpr std::size_t kHeaderSize = 12;

void put(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint64_t read(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string read_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void seek(std::size_t pos) { pos_ = pos; }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CorruptCheckpoint("checkpoint truncated");
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

TensorRecord to_record(const std::string& name, const Matrix& m, bool vector_shape) {
  TensorRecord r;
  r.name = name;
  if (vector_shape) {
    r.dims = {static_cast<std::uint64_t>(m.size())};
  } else {
    r.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  }
  r.values.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) r.values[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  return r;
}

bool is_bias(const std::string& name) { return name.find(".b_") != std::string::npos; }

void append_set(std::vector<TensorRecord>& out, const std::string& prefix, const ParameterSet& p) {
  p.for_each([&](const std::string& name, const Matrix& m) {
    out.push_back(to_record(prefix + name, m, is_bias(name)));
  });
}

TensorRecord meta_record(const std::string& name, std::initializer_list<double> values) {
  TensorRecord r;
  r.name = name;
  r.dims = {values.size()};
  for (double v : values) r.values.push_back(static_cast<float>(v));
  return r;
}

void fill_set(ParameterSet& p, const std::string& prefix,
              const std::map<std::string, const TensorRecord*>& index) {
  p.for_each([&](const std::string& name, Matrix& m) {
    const auto it = index.find(prefix + name);
    if (it == index.end()) throw CorruptCheckpoint("checkpoint lacks tensor " + prefix + name);
    const TensorRecord& r = *it->second;
    if (r.values.size() != static_cast<std::size_t>(m.size())) {
      throw CorruptCheckpoint("checkpoint tensor " + r.name + " has the wrong size");
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.values[static_cast<std::size_t>(i)];
  });
}

const TensorRecord& require(const std::map<std::string, const TensorRecord*>& index,
                            const std::string& name, std::size_t size) {
  const auto it = index.find(name);
  if (it == index.end() || it->second->values.size() != size) {
    throw CorruptCheckpoint("checkpoint lacks valid tensor " + name);
  }
  return *it->second;
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const std::vector<TensorRecord>& tensors) {
  std::string out(kMagic, 4);
  put(out, kCheckpointVersion, 4);
  put(out, tensors.size(), 4);
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF || t.dims.size() > 0xFF) {
      throw std::invalid_argument("write_tensor_file: tensor name or rank too large");
    }
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) throw std::invalid_argument("write_tensor_file: dims/payload mismatch");
    put(out, t.name.size(), 2);
    out += t.name;
    put(out, t.dims.size(), 1);
    for (auto d : t.dims) put(out, d, 8);
    for (float v : t.values) put(out, std::bit_cast<std::uint32_t>(v), 4);
  }
  const auto* body = reinterpret_cast<const Bytef*>(out.data() + kHeaderSize);
  const uLong crc = crc32(0L, body, static_cast<uInt>(out.size() - kHeaderSize));
  put(out, crc, 4);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write checkpoint " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("short write to checkpoint " + path.string());
}

std::vector<TensorRecord> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CorruptCheckpoint("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderSize + 4) throw CorruptCheckpoint("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CorruptCheckpoint("bad checkpoint magic");

  const std::size_t body_end = bytes.size() - 4;
  Reader reader(bytes, body_end);
  reader.seek(4);
  const auto version = reader.read(4);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = reader.read(4);

  std::vector<TensorRecord> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord t;
    t.name = reader.read_string(static_cast<std::size_t>(reader.read(2)));
    const auto ndim = reader.read(1);
    std::uint64_t total = 1;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      t.dims.push_back(reader.read(8));
      total *= t.dims.back();
    }
    if (total > (body_end - reader.pos()) / 4) throw CorruptCheckpoint("checkpoint truncated");
    t.values.resize(static_cast<std::size_t>(total));
    for (auto& v : t.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(reader.read(4)));
    tensors.push_back(std::move(t));
  }
  if (reader.pos() != body_end) throw CorruptCheckpoint("checkpoint has trailing bytes");

  Reader tail(bytes, bytes.size());
  tail.seek(body_end);
  const auto stored = tail.read(4);
  const uLong crc = crc32(0L, bytes.data() + kHeaderSize, static_cast<uInt>(body_end - kHeaderSize));
  if (stored != crc) throw CorruptCheckpoint("checkpoint checksum mismatch");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::vector<TensorRecord> tensors;
  tensors.push_back(meta_record("meta.stft", {static_cast<double>(ckpt.stft.frame_length),
                                              static_cast<double>(ckpt.stft.fft_length),
                                              static_cast<double>(ckpt.stft.hop),
                                              static_cast<double>(ckpt.stft.sample_rate)}));
  tensors.push_back(meta_record(
      "meta.model",
      {static_cast<double>(ckpt.dims.bins), static_cast<double>(ckpt.dims.trimmed),
       static_cast<double>(ckpt.dims.sequence.length), static_cast<double>(ckpt.dims.sequence.context),
       ckpt.dims.alignment == EncoderAlignment::literal ? 0.0 : 1.0}));
  append_set(tensors, "", ckpt.params);
  if (ckpt.optimizer) {
    tensors.push_back(meta_record("adam.step", {static_cast<double>(ckpt.optimizer->step)}));
    append_set(tensors, "adam.m.", ckpt.optimizer->first_moment);
    append_set(tensors, "adam.v.", ckpt.optimizer->second_moment);
  }
  write_tensor_file(path, tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto tensors = read_tensor_file(path);
  std::map<std::string, const TensorRecord*> index;
  for (const auto& t : tensors) {
    if (!index.emplace(t.name, &t).second) throw CorruptCheckpoint("duplicate tensor " + t.name);
  }

  Checkpoint ckpt;
  const auto& stft = require(index, "meta.stft", 4).values;
  ckpt.stft.frame_length = static_cast<std::size_t>(stft[0]);
  ckpt.stft.fft_length = static_cast<std::size_t>(stft[1]);
  ckpt.stft.hop = static_cast<std::size_t>(stft[2]);
  ckpt.stft.sample_rate = static_cast<std::size_t>(stft[3]);
  const auto& model = require(index, "meta.model", 5).values;
  ckpt.dims.bins = static_cast<std::size_t>(model[0]);
  ckpt.dims.trimmed = static_cast<std::size_t>(model[1]);
  ckpt.dims.sequence.length = static_cast<std::size_t>(model[2]);
  ckpt.dims.sequence.context = static_cast<std::size_t>(model[3]);
  ckpt.dims.alignment = model[4] == 0.0f ? EncoderAlignment::literal : EncoderAlignment::realigned;
  try {
    ckpt.stft.validate();
    ckpt.dims.validate();
  } catch (const std::invalid_argument& e) {
    throw CorruptCheckpoint(std::string("checkpoint metadata invalid: ") + e.what());
  }

  ckpt.params = ParameterSet::zeros(ckpt.dims);
  fill_set(ckpt.params, "", index);
  if (index.count("adam.step") != 0) {
    AdamState state = AdamState::zeros(ckpt.dims);
    state.step = static_cast<std::uint64_t>(require(index, "adam.step", 1).values[0]);
    fill_set(state.first_moment, "adam.m.", index);
    fill_set(state.second_moment, "adam.v.", index);
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

}  // namespace madt
