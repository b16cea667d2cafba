#include "madtwinnet/denoiser.hpp"

#include "madtwinnet/gradcheck.hpp"
#include "madtwinnet/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace madt {

DenoiserParams DenoiserParams::zeros(std::size_t bins) {
  const auto n = static_cast<Eigen::Index>(bins);
  const auto hidden = static_cast<Eigen::Index>(bottleneck(bins));
  return DenoiserParams{Matrix::Zero(n, hidden), Matrix::Zero(1, hidden), Matrix::Zero(hidden, n),
                        Matrix::Zero(1, n)};
}

Matrix denoise(const Matrix& v_masked, const DenoiserParams& params, DenoiserTrace* trace) {
  if (v_masked.cols() != params.w_enc.rows()) {
    throw std::invalid_argument("denoise: input width differs from N");
  }
  Matrix pre_enc = v_masked * params.w_enc;
  pre_enc.rowwise() += params.b_enc.row(0);
  Matrix h_enc = pre_enc.cwiseMax(0.0);
  Matrix pre_dec = h_enc * params.w_dec;
  pre_dec.rowwise() += params.b_dec.row(0);
  Matrix filter = pre_dec.cwiseMax(0.0);
  Matrix out = filter.cwiseProduct(v_masked);
  if (trace != nullptr) {
    *trace = DenoiserTrace{v_masked, std::move(pre_enc), std::move(h_enc), std::move(pre_dec),
                           std::move(filter)};
  }
  return out;
}

Matrix denoise_backward(const DenoiserParams& params, const DenoiserTrace& trace,
                        const Matrix& d_out, DenoiserParams& grad) {
  Matrix d_v = d_out.cwiseProduct(trace.filter);
  const Matrix d_pre_dec =
      (trace.pre_dec.array() > 0.0).select(d_out.cwiseProduct(trace.input), 0.0);
  grad.w_dec.noalias() += trace.h_enc.transpose() * d_pre_dec;
  grad.b_dec += d_pre_dec.colwise().sum();
  const Matrix d_h_enc = d_pre_dec * params.w_dec.transpose();
  const Matrix d_pre_enc = (trace.pre_enc.array() > 0.0).select(d_h_enc, 0.0);
  grad.w_enc.noalias() += trace.input.transpose() * d_pre_enc;
  grad.b_enc += d_pre_enc.colwise().sum();
  d_v.noalias() += d_pre_enc * params.w_enc.transpose();
  return d_v;
}

double denoiser_gradient_check(std::uint64_t seed) {
  constexpr std::size_t kBins = 12;
  constexpr Eigen::Index kFrames = 3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::uniform_real_distribution<double> uniform(0.1, 1.0);

  DenoiserParams params = DenoiserParams::zeros(kBins);
  auto fill = [&](Matrix& m) { m = m.unaryExpr([&](double) { return normal(rng); }); };
  fill(params.w_enc);
  fill(params.w_dec);
  params.b_enc.setConstant(0.3);
  params.b_dec.setConstant(0.3);
  Matrix v = Matrix::Zero(kFrames, kBins).unaryExpr([&](double) { return uniform(rng); });
  Matrix target = Matrix::Zero(kFrames, kBins).unaryExpr([&](double) { return uniform(rng); });

  auto loss = [&](const DenoiserParams& p) { return generalized_kl(target, denoise(v, p)); };

  DenoiserTrace trace;
  const Matrix out = denoise(v, params, &trace);
  DenoiserParams grad = DenoiserParams::zeros(kBins);
  denoise_backward(params, trace, generalized_kl_grad(target, out), grad);

  double worst = 0.0;
  auto check = [&](Matrix DenoiserParams::*member) {
    const Matrix numeric = central_difference(params.*member, [&](const Matrix&) {
      return loss(params);
    });
    worst = std::max(worst, max_relative_error(grad.*member, numeric));
  };
  check(&DenoiserParams::w_enc);
  check(&DenoiserParams::b_enc);
  check(&DenoiserParams::w_dec);
  check(&DenoiserParams::b_dec);
  return worst;
}

}  // namespace madt
