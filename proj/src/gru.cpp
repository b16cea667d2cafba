#include "madtwinnet/gru.hpp"

#include <stdexcept>

namespace madt {
namespace {

Matrix sigmoid(const Matrix& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

GruParams GruParams::zeros(std::size_t input, std::size_t hidden) {
  const auto in = static_cast<Eigen::Index>(input);
  const auto h = static_cast<Eigen::Index>(hidden);
  return GruParams{Matrix::Zero(in, 3 * h), Matrix::Zero(h, 3 * h), Matrix::Zero(1, 3 * h),
                   Matrix::Zero(1, 3 * h)};
}

FrameSeq gru_forward(const GruParams& p, const FrameSeq& x, GruTrace* trace) {
  const Eigen::Index hidden = p.hidden_size();
  FrameSeq out;
  out.reserve(x.size());
  if (trace != nullptr) *trace = GruTrace{};
  if (x.empty()) return out;

  const Eigen::Index batch = x.front().rows();
  Matrix h = Matrix::Zero(batch, hidden);
  for (const Matrix& xt : x) {
    if (xt.cols() != p.input_size() || xt.rows() != batch) {
      throw std::invalid_argument("gru_forward: input shape mismatch");
    }
    Matrix gi = xt * p.w_input;
    gi.rowwise() += p.b_input.row(0);
    Matrix gh = h * p.w_hidden;
    gh.rowwise() += p.b_hidden.row(0);

    Matrix r = sigmoid(gi.leftCols(hidden) + gh.leftCols(hidden));
    Matrix z = sigmoid(gi.middleCols(hidden, hidden) + gh.middleCols(hidden, hidden));
    Matrix hn = gh.rightCols(hidden);
    Matrix n = (gi.rightCols(hidden) + r.cwiseProduct(hn)).array().tanh().matrix();
    Matrix next = (1.0 - z.array()) * n.array() + z.array() * h.array();

    if (trace != nullptr) {
      trace->x.push_back(xt);
      trace->h_prev.push_back(h);
      trace->r.push_back(std::move(r));
      trace->z.push_back(std::move(z));
      trace->n.push_back(std::move(n));
      trace->hn.push_back(std::move(hn));
    }
    h = next;
    out.push_back(std::move(next));
  }
  return out;
}

FrameSeq gru_backward(const GruParams& p, const GruTrace& trace, const FrameSeq& d_h,
                      GruParams& grad) {
  const std::size_t steps = trace.x.size();
  if (d_h.size() != steps) throw std::invalid_argument("gru_backward: step count mismatch");
  FrameSeq d_x(steps);
  if (steps == 0) return d_x;

  const Eigen::Index hidden = p.hidden_size();
  const Eigen::Index batch = trace.x.front().rows();
  Matrix carry = Matrix::Zero(batch, hidden);  // gradient flowing into h_{t} from step t+1
  Matrix d_gi(batch, 3 * hidden);
  Matrix d_gh(batch, 3 * hidden);

  for (std::size_t s = steps; s-- > 0;) {
    const Matrix dh = d_h[s] + carry;
    const auto& z = trace.z[s].array();
    const auto& r = trace.r[s].array();
    const auto& n = trace.n[s].array();
    const auto& hp = trace.h_prev[s].array();

    const Eigen::ArrayXXd dn = dh.array() * (1.0 - z);
    const Eigen::ArrayXXd dz = dh.array() * (hp - n);
    const Eigen::ArrayXXd da_n = dn * (1.0 - n * n);
    const Eigen::ArrayXXd dr = da_n * trace.hn[s].array();
    const Eigen::ArrayXXd da_r = dr * r * (1.0 - r);
    const Eigen::ArrayXXd da_z = dz * z * (1.0 - z);

    d_gi.leftCols(hidden) = da_r.matrix();
    d_gi.middleCols(hidden, hidden) = da_z.matrix();
    d_gi.rightCols(hidden) = da_n.matrix();
    d_gh.leftCols(hidden) = da_r.matrix();
    d_gh.middleCols(hidden, hidden) = da_z.matrix();
    d_gh.rightCols(hidden) = (da_n * r).matrix();

    grad.w_input.noalias() += trace.x[s].transpose() * d_gi;
    grad.b_input += d_gi.colwise().sum();
    grad.w_hidden.noalias() += trace.h_prev[s].transpose() * d_gh;
    grad.b_hidden += d_gh.colwise().sum();

    d_x[s] = d_gi * p.w_input.transpose();
    carry = (dh.array() * z).matrix() + d_gh * p.w_hidden.transpose();
  }
  return d_x;
}

}  // namespace madt
