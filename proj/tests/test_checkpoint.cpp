#include "madtwinnet/checkpoint.hpp"
#include "madtwinnet/errors.hpp"
#include "madtwinnet/selfcheck.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

using namespace madt;
using madt::testing::random_matrix;
using madt::testing::TempDir;

namespace {

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

Checkpoint sample_checkpoint(bool with_optimizer) {
  Checkpoint c;
  c.dims = gradient_check_dims();
  c.stft = StftConfig{31, 32, 8, 16000};
  c.params = init_parameters(3, c.dims);
  std::mt19937_64 rng(3);
  c.params.for_each([&](const std::string&, Matrix& m) { m += random_matrix(rng, m.rows(), m.cols()); });
  if (with_optimizer) {
    AdamState s = AdamState::zeros(c.dims);
    s.first_moment.for_each([&](const std::string&, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols()); });
    s.second_moment.for_each([&](const std::string&, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), 0.0, 1.0); });
    s.step = 1234;
    c.optimizer = s;
  }
  return c;
}

// Every tensor of `loaded` equals the float-rounded tensor of `original`.
void expect_float_rounded(const ParameterSet& original, const ParameterSet& loaded) {
  std::vector<const Matrix*> got;
  loaded.for_each([&](const std::string&, const Matrix& m) { got.push_back(&m); });
  std::size_t i = 0;
  original.for_each([&](const std::string& name, const Matrix& m) {
    const Matrix& l = *got[i++];
    ASSERT_EQ(l.rows(), m.rows()) << name;
    ASSERT_EQ(l.cols(), m.cols()) << name;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      ASSERT_EQ(l.data()[k], double(float(m.data()[k]))) << name << "[" << k << "]";
    }
  });
}

}  // namespace

TEST(TensorFile, RoundTrip) {
  TempDir dir("ckpt");
  const std::vector<TensorRecord> in{{"a", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"scalar", {}, {7.5f}},
                                     {"empty", {0}, {}}};
  write_tensor_file(dir / "t.madt", in);
  const auto out = read_tensor_file(dir / "t.madt");
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    EXPECT_EQ(out[i].dims, in[i].dims);
    EXPECT_EQ(out[i].values, in[i].values);
  }
  const auto bytes = read_bytes(dir / "t.madt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MADT");
}

TEST(Checkpoint, RoundTripIsFloatRounded) {
  TempDir dir("ckpt");
  const Checkpoint c = sample_checkpoint(false);
  save_checkpoint(dir / "c.madt", c);
  const Checkpoint back = load_checkpoint(dir / "c.madt");
  expect_float_rounded(c.params, back.params);
  EXPECT_EQ(back.stft.frame_length, 31u);
  EXPECT_EQ(back.stft.fft_length, 32u);
  EXPECT_EQ(back.stft.hop, 8u);
  EXPECT_EQ(back.stft.sample_rate, 16000u);
  EXPECT_EQ(back.dims.bins, c.dims.bins);
  EXPECT_EQ(back.dims.trimmed, c.dims.trimmed);
  EXPECT_EQ(back.dims.sequence.length, c.dims.sequence.length);
  EXPECT_EQ(back.dims.sequence.context, c.dims.sequence.context);
  EXPECT_EQ(back.dims.alignment, c.dims.alignment);
  EXPECT_FALSE(back.optimizer.has_value());
}

TEST(Checkpoint, ResaveIsByteIdentical) {
  TempDir dir("ckpt");
  save_checkpoint(dir / "a.madt", sample_checkpoint(true));
  save_checkpoint(dir / "b.madt", load_checkpoint(dir / "a.madt"));
  EXPECT_EQ(read_bytes(dir / "a.madt"), read_bytes(dir / "b.madt"));
}

TEST(Checkpoint, OptimizerStateRoundTrips) {
  TempDir dir("ckpt");
  const Checkpoint c = sample_checkpoint(true);
  save_checkpoint(dir / "c.madt", c);
  const Checkpoint back = load_checkpoint(dir / "c.madt");
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 1234u);
  expect_float_rounded(c.optimizer->first_moment, back.optimizer->first_moment);
  expect_float_rounded(c.optimizer->second_moment, back.optimizer->second_moment);
}

TEST(Checkpoint, LiteralAlignmentSurvives) {
  TempDir dir("ckpt");
  Checkpoint c = sample_checkpoint(false);
  c.dims.alignment = EncoderAlignment::literal;
  save_checkpoint(dir / "c.madt", c);
  EXPECT_EQ(load_checkpoint(dir / "c.madt").dims.alignment, EncoderAlignment::literal);
}

class CorruptedFile : public ::testing::Test {
 protected:
  void SetUp() override {
    save_checkpoint(dir_ / "good.madt", sample_checkpoint(false));
    bytes_ = read_bytes(dir_ / "good.madt");
  }
  void expect_corrupt(const std::vector<char>& bytes) {
    write_bytes(dir_ / "bad.madt", bytes);
    EXPECT_THROW(load_checkpoint(dir_ / "bad.madt"), CorruptCheckpoint);
  }
  TempDir dir_{"ckpt"};
  std::vector<char> bytes_;
};

TEST_F(CorruptedFile, BadMagic) {
  auto b = bytes_;
  b[0] = 'X';
  expect_corrupt(b);
}

TEST_F(CorruptedFile, BadVersion) {
  auto b = bytes_;
  b[4] = 2;
  expect_corrupt(b);
}

TEST_F(CorruptedFile, FlippedPayloadBitFailsChecksum) {
  auto b = bytes_;
  b[b.size() / 2] ^= 0x10;
  expect_corrupt(b);
}

TEST_F(CorruptedFile, Truncated) {
  for (std::size_t keep : {std::size_t(0), std::size_t(6), bytes_.size() / 3, bytes_.size() - 1}) {
    expect_corrupt(std::vector<char>(bytes_.begin(), bytes_.begin() + std::ptrdiff_t(keep)));
  }
}

TEST_F(CorruptedFile, TrailingGarbage) {
  auto b = bytes_;
  b.push_back(0);
  expect_corrupt(b);
}

TEST_F(CorruptedFile, MissingFile) {
  EXPECT_THROW(load_checkpoint(dir_ / "nothing.madt"), CorruptCheckpoint);
}
