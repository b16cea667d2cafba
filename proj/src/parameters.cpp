#include "madtwinnet/parameters.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace madt {
namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out) {
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng_);
    return m;
  }

  Matrix orthogonal(Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng_);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Sign fix makes the draw uniform over the orthogonal group.
    for (Eigen::Index j = 0; j < n; ++j) {
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
  }

  void gru(GruParams& g) {
    const Eigen::Index in = g.input_size();
    const Eigen::Index h = g.hidden_size();
    for (Eigen::Index gate = 0; gate < 3; ++gate) {
      g.w_input.middleCols(gate * h, h) = glorot(in, h);
      g.w_hidden.middleCols(gate * h, h) = orthogonal(h);
    }
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

ParameterSet ParameterSet::zeros(const MaskerConfig& dims) {
  return ParameterSet{MaskerParams::zeros(dims), TwinParams::zeros(dims),
                      DenoiserParams::zeros(dims.bins)};
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t count = 0;
  for_each([&](const std::string&, const Matrix& m) { count += static_cast<std::size_t>(m.size()); });
  return count;
}

bool ParameterSet::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

ParameterSet init_parameters(std::uint64_t seed, const MaskerConfig& dims) {
  dims.validate();
  ParameterSet p = ParameterSet::zeros(dims);
  Initializer init(seed);
  const auto f = static_cast<Eigen::Index>(dims.trimmed);
  const auto n = static_cast<Eigen::Index>(dims.bins);
  const auto hidden = static_cast<Eigen::Index>(DenoiserParams::bottleneck(dims.bins));

  init.gru(p.masker.enc_forward);
  init.gru(p.masker.enc_backward);
  init.gru(p.masker.decoder);
  p.masker.w_mask = init.glorot(f, n);
  init.gru(p.twin.decoder);
  p.twin.w_mask = init.glorot(f, n);
  p.twin.w_bridge = init.glorot(f, f);
  p.denoiser.w_enc = init.glorot(n, hidden);
  p.denoiser.w_dec = init.glorot(hidden, n);
  return p;
}

}  // namespace madt
