#include "madtwinnet/selfcheck.hpp"

#include "madtwinnet/data.hpp"
#include "madtwinnet/denoiser.hpp"
#include "madtwinnet/eval.hpp"
#include "madtwinnet/objective.hpp"
#include "madtwinnet/signal.hpp"
#include "madtwinnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace madt {
namespace {

constexpr double kGradientTolerance = 1e-4;

CheckResult at_most(std::string name, double value, double limit, std::string detail = {}) {
  return CheckResult{std::move(name), value <= limit, value, limit, std::move(detail)};
}

CheckResult gradient_row(const std::string& name, std::uint64_t seed, const GradCheckOptions& opts) {
  const GradCheckReport r = gradient_check_full(seed, gradient_check_dims(), opts);
  return at_most(name, r.max_relative_error, kGradientTolerance, "worst: " + r.worst_tensor);
}

std::vector<double> noise(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 0.3);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

double griffin_lim_worst_rise(std::mt19937_64& rng) {
  const StftConfig cfg;
  const Eigen::Index frames = 24;
  const auto bins = static_cast<Eigen::Index>(cfg.retained_bins());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  MagnitudeSpectrogram mag{Matrix::NullaryExpr(frames, bins, [&] { return unit(rng); })};
  const Matrix init = Matrix::NullaryExpr(frames, bins, [&] { return angle(rng); });
  const auto gl = griffin_lim(mag, init, 10, cfg, std::nullopt, true);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < gl.inconsistency.size(); ++k) {
    worst = std::max(worst, (gl.inconsistency[k] - gl.inconsistency[k - 1]) / gl.inconsistency[k - 1]);
  }
  return worst;
}

double irm_worst_error(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<MagnitudeSpectrogram> sources(3);
  for (auto& s : sources) s.data = Matrix::NullaryExpr(20, 33, [&] { return unit(rng); });
  Matrix sum = Matrix::Zero(20, 33);
  double worst = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const Matrix m = ideal_ratio_mask(sources, j);
    worst = std::max({worst, -m.minCoeff(), m.maxCoeff() - 1.0});
    sum += m;
  }
  return std::max(worst, (sum.array() - 1.0).abs().maxCoeff());
}

double bss_oracle_worst(std::mt19937_64& rng) {
  constexpr std::size_t kSamples = 4096;
  std::uniform_real_distribution<double> gain(0.1, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> target = noise(rng, kSamples);
    std::vector<double> interferer = noise(rng, kSamples);
    double dot = 0.0, et = 0.0;
    for (std::size_t i = 0; i < kSamples; ++i) {
      dot += target[i] * interferer[i];
      et += target[i] * target[i];
    }
    double ei = 0.0;
    for (std::size_t i = 0; i < kSamples; ++i) {
      interferer[i] -= dot / et * target[i];
      ei += interferer[i] * interferer[i];
    }
    const double a = gain(rng), b = gain(rng);
    std::vector<double> est(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) est[i] = a * target[i] + b * interferer[i];
    const auto scores = sdr_sir(bss_decompose(est, target, {interferer}));
    const double expected = 10.0 * std::log10(a * a * et / (b * b * ei));
    worst = std::max(worst, std::abs(scores.sir_db - expected));
  }
  return worst;
}

}  // namespace

MaskerConfig gradient_check_dims() {
  return MaskerConfig{16, 8, SequenceConfig{8, 2}, EncoderAlignment::realigned};
}

double stft_roundtrip_error(const std::vector<double>& signal, const StftConfig& cfg) {
  const auto back = istft(stft(signal, cfg), cfg, signal.size());
  const std::size_t edge = cfg.frame_length;
  if (signal.size() <= 2 * edge) throw std::invalid_argument("stft_roundtrip_error: signal too short");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = edge; i + edge < signal.size(); ++i) {
    err += (back[i] - signal[i]) * (back[i] - signal[i]);
    ref += signal[i] * signal[i];
  }
  return std::sqrt(err / ref);
}

std::vector<CheckResult> run_self_checks(std::uint64_t seed,
                                         const std::function<void(ParameterSet&)>& corrupt_gradient) {
  std::vector<CheckResult> out;

  GradCheckOptions twin;
  twin.corrupt_analytic = corrupt_gradient;
  out.push_back(gradient_row("gradient check, twin (stop)", seed, twin));
  GradCheckOptions full = twin;
  full.loss.twin.backprop = TwinLossBackprop::full;
  out.push_back(gradient_row("gradient check, twin (full)", seed, full));
  GradCheckOptions plain = twin;
  plain.loss.twin_enabled = false;
  out.push_back(gradient_row("gradient check, no twin", seed, plain));
  out.push_back(at_most("denoiser gradient check", denoiser_gradient_check(seed), kGradientTolerance));

  std::mt19937_64 rng(seed);
  out.push_back(at_most("stft round-trip (rel. RMS)", stft_roundtrip_error(noise(rng, 44100), StftConfig{}), 1e-6));
  out.push_back(at_most("griffin-lim monotone (worst rise)", griffin_lim_worst_rise(rng), 1e-9));
  out.push_back(at_most("ratio mask range and sum", irm_worst_error(rng), 1e-6));

  const Matrix two = Matrix::Constant(1, 1, 2.0), one = Matrix::Constant(1, 1, 1.0);
  out.push_back(at_most("generalized KL hand value", std::abs(generalized_kl(two, one) - (2.0 * std::log(2.0) - 1.0)), 1e-12));
  out.push_back(at_most("generalized KL self-distance", std::abs(generalized_kl(two, two)), 1e-12));
  out.push_back(at_most("bss SIR closed form (dB)", bss_oracle_worst(rng), 1e-6));
  return out;
}

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results) {
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %-6s %12s %12s  %s\n", "check", "result", "value", "limit", "detail");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-36s %-6s %12.3e %12.3e  %s\n", r.name.c_str(),
                  r.passed ? "PASS" : "FAIL", r.value, r.limit, r.detail.c_str());
    out << line;
  }
}

}  // namespace madt
