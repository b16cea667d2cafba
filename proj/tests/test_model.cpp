#include "madtwinnet/denoiser.hpp"
#include "madtwinnet/errors.hpp"
#include "madtwinnet/gradcheck.hpp"
#include "madtwinnet/gru.hpp"
#include "madtwinnet/masker.hpp"
#include "madtwinnet/objective.hpp"
#include "madtwinnet/twinnet.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace madt;
using madt::testing::random_matrix;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GruParams random_gru(std::mt19937_64& rng, Eigen::Index in, Eigen::Index hidden, double scale = 0.5) {
  return GruParams{random_matrix(rng, in, 3 * hidden, -scale, scale),
                   random_matrix(rng, hidden, 3 * hidden, -scale, scale),
                   random_matrix(rng, 1, 3 * hidden, -scale, scale),
                   random_matrix(rng, 1, 3 * hidden, -scale, scale)};
}

// Cell whose state is tanh of its input: update gate shut, no recurrence,
// candidate weights the identity.
GruParams tanh_cell(Eigen::Index f) {
  GruParams p = GruParams::zeros(std::size_t(f), std::size_t(f));
  p.w_input.block(0, 2 * f, f, f) = Matrix::Identity(f, f);
  p.b_input.block(0, f, 1, f).setConstant(-60.0);
  return p;
}

MaskerConfig tiny_config(EncoderAlignment a = EncoderAlignment::realigned) {
  return MaskerConfig{6, 3, SequenceConfig{6, 1}, a};
}

}  // namespace

// ---- GRU ----

TEST(Gru, SingleStepMatchesScalarFormula) {
  std::mt19937_64 rng(1);
  const int in = 3, hid = 2;
  const GruParams p = random_gru(rng, in, hid);
  const Matrix x0 = random_matrix(rng, 1, in), x1 = random_matrix(rng, 1, in);
  const FrameSeq h = gru_forward(p, {x0, x1});

  std::vector<double> state(hid, 0.0);
  for (const Matrix* x : {&x0, &x1}) {
    std::vector<double> next(hid);
    for (int j = 0; j < hid; ++j) {
      auto gate_in = [&](int g) {
        double s = p.b_input(0, g * hid + j);
        for (int i = 0; i < in; ++i) s += (*x)(0, i) * p.w_input(i, g * hid + j);
        return s;
      };
      auto gate_h = [&](int g) {
        double s = p.b_hidden(0, g * hid + j);
        for (int i = 0; i < hid; ++i) s += state[i] * p.w_hidden(i, g * hid + j);
        return s;
      };
      const double r = sigmoid(gate_in(0) + gate_h(0));
      const double z = sigmoid(gate_in(1) + gate_h(1));
      const double n = std::tanh(gate_in(2) + r * gate_h(2));
      next[j] = (1.0 - z) * n + z * state[j];
    }
    state = next;
  }
  for (int j = 0; j < hid; ++j) EXPECT_NEAR(h[1](0, j), state[j], 1e-14);
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  GruParams p = random_gru(rng, 3, 4);
  FrameSeq x;
  for (int t = 0; t < 5; ++t) x.push_back(random_matrix(rng, 2, 3));
  std::vector<Matrix> weights;
  for (int t = 0; t < 5; ++t) weights.push_back(random_matrix(rng, 2, 4));
  auto loss = [&] {
    const FrameSeq h = gru_forward(p, x);
    double s = 0.0;
    for (int t = 0; t < 5; ++t) s += h[t].cwiseProduct(weights[t]).sum();
    return s;
  };
  GruTrace trace;
  gru_forward(p, x, &trace);
  GruParams grad = GruParams::zeros(3, 4);
  const FrameSeq dx = gru_backward(p, trace, weights, grad);

  EXPECT_LE(max_relative_error(grad.w_input, central_difference(p.w_input, [&](const Matrix&) { return loss(); })), 1e-7);
  EXPECT_LE(max_relative_error(grad.w_hidden, central_difference(p.w_hidden, [&](const Matrix&) { return loss(); })), 1e-7);
  EXPECT_LE(max_relative_error(grad.b_input, central_difference(p.b_input, [&](const Matrix&) { return loss(); })), 1e-7);
  EXPECT_LE(max_relative_error(grad.b_hidden, central_difference(p.b_hidden, [&](const Matrix&) { return loss(); })), 1e-7);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LE(max_relative_error(dx[t], central_difference(x[t], [&](const Matrix&) { return loss(); })), 1e-7) << t;
  }
}

// ---- Masker ----

TEST(Masker, TrimKeepsLowBandsUpToEightKilohertz) {
  EXPECT_NEAR(744.0 * 44100.0 / 4096.0, 8010.0, 1.0);
  EXPECT_NEAR(93.0 * 44100.0 / 512.0, 8010.0, 1.0);
  std::mt19937_64 rng(3);
  const Matrix v = random_matrix(rng, 5, 9, 0.0, 1.0);
  EXPECT_EQ(trim(v, 9), v);
  const Matrix t = trim(v, 4);
  EXPECT_EQ(t.cols(), 4);
  EXPECT_EQ(t.col(3), v.col(3));
}

TEST(Masker, ZeroInputAndParametersEncodeToZero) {
  const MaskerConfig cfg = tiny_config();
  const Matrix h = encode(Matrix::Zero(6, 3), MaskerParams::zeros(cfg), cfg);
  EXPECT_EQ(h.rows(), 4);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Masker, DefaultShapes) {
  const MaskerConfig cfg{2049, 744, SequenceConfig{60, 10}, EncoderAlignment::realigned};
  const MaskerParams p = MaskerParams::zeros(cfg);
  const Matrix h_enc = encode(Matrix::Zero(60, 744), p, cfg);
  EXPECT_EQ(h_enc.rows(), 40);
  EXPECT_EQ(h_enc.cols(), 1488);
  const Matrix h_dec = decode(h_enc, p);
  EXPECT_EQ(h_dec.rows(), 40);
  EXPECT_EQ(h_dec.cols(), 744);
  const MaskerOutput out = masker_forward(Matrix::Zero(60, 2049), p, cfg);
  EXPECT_EQ(out.filtered.rows(), 40);
  EXPECT_EQ(out.filtered.cols(), 2049);
  EXPECT_EQ(out.filtered.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Masker, HandUnrolledEncoderRealigned) {
  const MaskerConfig cfg = tiny_config(EncoderAlignment::realigned);
  MaskerParams p = MaskerParams::zeros(cfg);
  p.enc_forward = tanh_cell(3);
  p.enc_backward = tanh_cell(3);
  std::mt19937_64 rng(4);
  const Matrix v = random_matrix(rng, 6, 3, 0.0, 1.0);
  const Matrix h = encode(v, p, cfg);
  for (int i = 0; i < 4; ++i) {
    const int t = i + 1;
    for (int c = 0; c < 3; ++c) {
      const double expect = std::tanh(v(t, c)) + v(t, c);
      EXPECT_NEAR(h(i, c), expect, 1e-12);
      EXPECT_NEAR(h(i, 3 + c), expect, 1e-12);
    }
  }
}

TEST(Masker, HandUnrolledEncoderLiteral) {
  const MaskerConfig cfg = tiny_config(EncoderAlignment::literal);
  MaskerParams p = MaskerParams::zeros(cfg);
  p.enc_forward = tanh_cell(3);
  p.enc_backward = tanh_cell(3);
  std::mt19937_64 rng(5);
  const Matrix v = random_matrix(rng, 6, 3, 0.0, 1.0);
  const Matrix h = encode(v, p, cfg);
  for (int i = 0; i < 4; ++i) {
    const int t = i + 1, mirrored = 5 - t;
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(h(i, c), std::tanh(v(t, c)) + v(t, c), 1e-12);
      EXPECT_NEAR(h(i, 3 + c), std::tanh(v(mirrored, c)) + v(mirrored, c), 1e-12);
    }
  }
}

TEST(Masker, RecurrentEncoderSeesWholeWindow) {
  // With recurrence the realigned backward half at the first central frame
  // depends on the last frame of the window.
  const MaskerConfig cfg = tiny_config();
  std::mt19937_64 rng(6);
  MaskerParams p = MaskerParams::zeros(cfg);
  p.enc_forward = random_gru(rng, 3, 3);
  p.enc_backward = random_gru(rng, 3, 3);
  Matrix v = random_matrix(rng, 6, 3, 0.0, 1.0);
  const Matrix a = encode(v, p, cfg);
  v.row(5) *= 2.0;
  const Matrix b = encode(v, p, cfg);
  EXPECT_GT((a.row(0).rightCols(3) - b.row(0).rightCols(3)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(a.row(0).leftCols(3), b.row(0).leftCols(3));
}

TEST(Masker, DecoderStatesAreBounded) {
  std::mt19937_64 rng(7);
  MaskerParams p = MaskerParams::zeros(tiny_config());
  p.decoder = random_gru(rng, 6, 3, 3.0);
  const Matrix h = decode(random_matrix(rng, 10, 6, -20.0, 20.0), p);
  EXPECT_LE(h.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(decode(Matrix::Zero(4, 6), MaskerParams::zeros(tiny_config())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Masker, SparsifyIsRelu) {
  EXPECT_EQ(sparsify(Matrix::Zero(2, 3), Matrix::Ones(3, 4), Matrix::Zero(1, 4)), Matrix::Zero(2, 4));
  Matrix h(1, 1);
  h << 1.0;
  Matrix w(1, 2);
  w << -2.0, 3.0;
  const Matrix m = sparsify(h, w, Matrix::Zero(1, 2));
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(0, 1), 3.0);  // no upper bound
}

TEST(Masker, SkipFilter) {
  const Matrix v = Matrix::Constant(2, 3, 2.0);
  EXPECT_EQ(apply_skip_filter(Matrix::Ones(2, 3), v), v);
  EXPECT_EQ(apply_skip_filter(Matrix::Zero(2, 3), v), Matrix::Zero(2, 3));
  EXPECT_EQ(apply_skip_filter(Matrix::Constant(2, 3, 0.5), v), Matrix::Ones(2, 3));
}

TEST(Masker, ForwardIsNonNegative) {
  const MaskerConfig cfg = tiny_config();
  std::mt19937_64 rng(8);
  MaskerParams p = MaskerParams::zeros(cfg);
  p.enc_forward = random_gru(rng, 3, 3);
  p.enc_backward = random_gru(rng, 3, 3);
  p.decoder = random_gru(rng, 6, 3);
  p.w_mask = random_matrix(rng, 3, 6);
  p.b_mask = random_matrix(rng, 1, 6);
  const Matrix v = random_matrix(rng, 6, 6, 0.0, 1.0);
  for (double gain : {1.0, 2.0}) {
    const MaskerOutput out = masker_forward(gain * v, p, cfg);
    EXPECT_EQ(out.filtered.rows(), 4);
    EXPECT_GE(out.filtered.minCoeff(), 0.0);
  }
  EXPECT_EQ(masker_forward(Matrix::Zero(6, 6), p, cfg).filtered.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Masker, RejectsNonFiniteInputAndBadShapes) {
  const MaskerConfig cfg = tiny_config();
  Matrix v = Matrix::Ones(6, 6);
  v(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(masker_forward(v, MaskerParams::zeros(cfg), cfg), NumericError);
  EXPECT_THROW(masker_forward(Matrix::Ones(5, 6), MaskerParams::zeros(cfg), cfg), std::invalid_argument);
  EXPECT_THROW((MaskerConfig{4, 5, SequenceConfig{6, 1}, EncoderAlignment::realigned}.validate()),
               std::invalid_argument);
}

// ---- Twin ----

TEST(Twin, ZeroInputGivesZeroOutputs) {
  const MaskerConfig cfg = tiny_config();
  const TwinOutput out = twin_forward(Matrix::Zero(4, 6), Matrix::Ones(4, 6), TwinParams::zeros(cfg),
                                      MaskerParams::zeros(cfg));
  EXPECT_EQ(out.v_twin.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.h_twin.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Twin, DefaultShapes) {
  const MaskerConfig cfg{2049, 744, SequenceConfig{60, 10}, EncoderAlignment::realigned};
  const TwinOutput out = twin_forward(Matrix::Zero(40, 1488), Matrix::Zero(40, 2049),
                                      TwinParams::zeros(cfg), MaskerParams::zeros(cfg));
  EXPECT_EQ(out.h_twin.rows(), 40);
  EXPECT_EQ(out.h_twin.cols(), 744);
  EXPECT_EQ(out.v_twin.rows(), 40);
  EXPECT_EQ(out.v_twin.cols(), 2049);
}

TEST(Twin, PalindromeInputMirrorsDecoder) {
  const MaskerConfig cfg = tiny_config();
  std::mt19937_64 rng(9);
  MaskerParams masker = MaskerParams::zeros(cfg);
  masker.decoder = random_gru(rng, 6, 3);
  TwinParams twin = TwinParams::zeros(cfg);
  twin.decoder = masker.decoder;
  Matrix h_enc(5, 6);
  for (int t = 0; t < 3; ++t) h_enc.row(t) = random_matrix(rng, 1, 6);
  h_enc.row(3) = h_enc.row(1);
  h_enc.row(4) = h_enc.row(0);

  const Matrix h_dec = decode(h_enc, masker);
  const TwinOutput out = twin_forward(h_enc, Matrix::Ones(5, 6), twin, masker);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LE((out.h_twin.row(t) - h_dec.row(4 - t)).cwiseAbs().maxCoeff(), 1e-15) << t;
  }
}

TEST(Twin, SharedProjectionUsesMaskerWeights) {
  const MaskerConfig cfg = tiny_config();
  std::mt19937_64 rng(10);
  MaskerParams masker = MaskerParams::zeros(cfg);
  masker.w_mask = random_matrix(rng, 3, 6);
  masker.b_mask = random_matrix(rng, 1, 6, 0.5, 1.0);
  TwinParams twin = TwinParams::zeros(cfg);
  twin.decoder = random_gru(rng, 6, 3);
  const Matrix h_enc = random_matrix(rng, 4, 6);
  const Matrix v = random_matrix(rng, 4, 6, 0.0, 1.0);
  const TwinOutput own = twin_forward(h_enc, v, twin, masker, TwinOptions{TwinLossBackprop::stop, false});
  const TwinOutput shared = twin_forward(h_enc, v, twin, masker, TwinOptions{TwinLossBackprop::stop, true});
  EXPECT_EQ(own.v_twin, Matrix::Zero(4, 6));
  EXPECT_EQ(shared.v_twin, apply_skip_filter(sparsify(shared.h_twin, masker.w_mask, masker.b_mask), v));
}

TEST(TwinLoss, HandExamples) {
  const Matrix eye = Matrix::Identity(2, 2), zero_b = Matrix::Zero(1, 2);
  std::mt19937_64 rng(11);
  const Matrix h = random_matrix(rng, 3, 2);
  EXPECT_EQ(twin_regularization_loss(h, h, eye, zero_b), 0.0);
  Matrix h_dec(1, 2);
  h_dec << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(twin_regularization_loss(h_dec, Matrix::Zero(1, 2), eye, zero_b), 5.0);
}

TEST(TwinLoss, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  const Matrix h_dec = random_matrix(rng, 5, 3), h_twin = random_matrix(rng, 5, 3);
  const Matrix w = random_matrix(rng, 3, 3), b = random_matrix(rng, 1, 3);
  double expected = 0.0;
  for (int t = 0; t < 5; ++t) {
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
      double f = b(0, k);
      for (int i = 0; i < 3; ++i) f += h_dec(t, i) * w(i, k);
      sq += (f - h_twin(t, k)) * (f - h_twin(t, k));
    }
    expected += std::sqrt(sq);
  }
  EXPECT_NEAR(twin_regularization_loss(h_dec, h_twin, w, b), expected, 1e-13);
}

TEST(TwinLoss, StopModeSendsNoGradientToTwinStates) {
  const MaskerConfig cfg = tiny_config();
  std::mt19937_64 rng(13);
  TwinParams twin = TwinParams::zeros(cfg);
  twin.w_bridge = random_matrix(rng, 3, 3);
  FrameSeq h_dec{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3)};
  FrameSeq h_twin{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3)};
  TwinParams g_stop = TwinParams::zeros(cfg), g_full = TwinParams::zeros(cfg);
  const TwinLossGrad stop = twin_regularization_batch(h_dec, h_twin, twin, TwinLossBackprop::stop, 1.0, &g_stop);
  const TwinLossGrad full = twin_regularization_batch(h_dec, h_twin, twin, TwinLossBackprop::full, 1.0, &g_full);
  EXPECT_EQ(stop.loss, full.loss);
  for (const auto& m : stop.d_h_twin) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
  double full_mag = 0.0;
  for (const auto& m : full.d_h_twin) full_mag += m.cwiseAbs().sum();
  EXPECT_GT(full_mag, 0.0);
  EXPECT_EQ(g_stop.w_bridge, g_full.w_bridge);
  for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(stop.d_h_dec[t], full.d_h_dec[t]);
}

// ---- Denoiser ----

TEST(Denoiser, BottleneckIsHalfTheBins) {
  EXPECT_EQ(DenoiserParams::bottleneck(2049), 1024u);
  EXPECT_EQ(DenoiserParams::zeros(2049).w_enc.cols(), 1024);
}

TEST(Denoiser, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(14);
  DenoiserParams p = DenoiserParams::zeros(8);
  p.w_enc = random_matrix(rng, 8, 4);
  p.b_dec.setConstant(0.7);
  EXPECT_EQ(denoise(Matrix::Zero(3, 8), p), Matrix::Zero(3, 8));
}

TEST(Denoiser, UnitFilterIsIdentity) {
  std::mt19937_64 rng(15);
  DenoiserParams p = DenoiserParams::zeros(8);
  p.b_dec.setConstant(1.0);
  const Matrix v = random_matrix(rng, 3, 8, 0.0, 1.0);
  EXPECT_EQ(denoise(v, p), v);
}

TEST(Denoiser, NonNegativeZeroPreservingAndFrameEquivariant) {
  std::mt19937_64 rng(16);
  DenoiserParams p = DenoiserParams::zeros(8);
  p.w_enc = random_matrix(rng, 8, 4);
  p.w_dec = random_matrix(rng, 4, 8);
  p.b_enc = random_matrix(rng, 1, 4);
  p.b_dec = random_matrix(rng, 1, 8);
  Matrix v = random_matrix(rng, 5, 8, 0.0, 1.0);
  v(1, 3) = 0.0;
  const Matrix out = denoise(v, p);
  EXPECT_GE(out.minCoeff(), 0.0);
  EXPECT_EQ(out(1, 3), 0.0);
  Matrix permuted(5, 8);
  const int order[] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) permuted.row(i) = v.row(order[i]);
  const Matrix out_perm = denoise(permuted, p);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out_perm.row(i), out.row(order[i]));
}

TEST(Denoiser, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LE(denoiser_gradient_check(seed), 1e-4) << seed;
  EXPECT_EQ(denoiser_gradient_check(3), denoiser_gradient_check(3));
}

TEST(Denoiser, ZeroTargetAndInputGiveZeroLossAndGradient) {
  std::mt19937_64 rng(17);
  DenoiserParams p = DenoiserParams::zeros(6);
  p.w_enc = random_matrix(rng, 6, 3);
  p.w_dec = random_matrix(rng, 3, 6);
  const Matrix zero = Matrix::Zero(2, 6);
  DenoiserTrace trace;
  const Matrix out = denoise(zero, p, &trace);
  EXPECT_EQ(generalized_kl(zero, out), 0.0);
  DenoiserParams grad = DenoiserParams::zeros(6);
  denoise_backward(p, trace, generalized_kl_grad(zero, out), grad);
  EXPECT_EQ(grad.w_enc.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grad.w_dec.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grad.b_enc.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grad.b_dec.cwiseAbs().maxCoeff(), 0.0);
}
